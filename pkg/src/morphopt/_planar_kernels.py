"""Compiled kernels for the sagittal Bike-Neck-Head model.

Generalized coordinates ``q = (x, z, pitch, mu, q_h)`` where ``(x, z)`` is the
Bike CoM. All functions take a flat parameter vector laid out by the ``P_*``
indices below so they can be jitted without object arguments.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NQ = 5

P_G = 0
P_MB, P_IB, P_WB, P_R = 1, 2, 3, 4
P_MDX, P_MDZ = 5, 6
P_MN, P_IN, P_CN, P_KX, P_KZ = 7, 8, 9, 10, 11
P_MH, P_IH, P_CH = 12, 13, 14
P_RMU, P_RQH = 15, 16
P_K, P_C, P_FRIC = 17, 18, 19
P_LO_MU, P_HI_MU, P_LO_QH, P_HI_QH = 20, 21, 22, 23
P_TMAX_MU, P_WMAX_MU, P_KP_MU, P_KD_MU = 24, 25, 26, 27
P_TMAX_QH, P_WMAX_QH, P_KP_QH, P_KD_QH = 28, 29, 30, 31
NPARAM = 32

# controller modes
MODE_PD_RAMP = 0
MODE_BANG_BANG = 1
MODE_VERTICAL_FORCE = 2

# CoM climb rate that marks a jump attempt as under way (m/s)
RISE_SPEED = 0.05


@njit(cache=True)
def _perp(vx, vz):
    return -vz, vx


@njit(cache=True)
def kinematics(q, P):
    """Points of the chain: rows are bike CoM, mu pivot, q_h pivot, neck CoM,
    head CoM, rear axle, front axle. Also returns absolute link angles."""
    pts = np.empty((7, 2))
    th = q[2]
    an = th + q[3]
    ah = an + q[4]
    c, s = math.cos(th), math.sin(th)
    cn, sn = math.cos(an), math.sin(an)
    ch, sh = math.cos(ah), math.sin(ah)
    half = 0.5 * P[P_WB]
    pts[0, 0] = q[0]
    pts[0, 1] = q[1]
    # mu pivot: offset from rear axle in the Bike frame
    ox = -half + P[P_MDX]
    oz = P[P_MDZ]
    pts[1, 0] = q[0] + c * ox - s * oz
    pts[1, 1] = q[1] + s * ox + c * oz
    pts[2, 0] = pts[1, 0] + cn * P[P_KX] - sn * P[P_KZ]
    pts[2, 1] = pts[1, 1] + sn * P[P_KX] + cn * P[P_KZ]
    pts[3, 0] = pts[1, 0] + cn * P[P_CN]
    pts[3, 1] = pts[1, 1] + sn * P[P_CN]
    pts[4, 0] = pts[2, 0] + ch * P[P_CH]
    pts[4, 1] = pts[2, 1] + sh * P[P_CH]
    pts[5, 0] = q[0] - c * half
    pts[5, 1] = q[1] - s * half
    pts[6, 0] = q[0] + c * half
    pts[6, 1] = q[1] + s * half
    return pts, th, an, ah


@njit(cache=True)
def body_jacobians(q, P):
    """CoM Jacobians (3 bodies x 2 x NQ) and angular rows (3 x NQ)."""
    pts, th, an, ah = kinematics(q, P)
    Jv = np.zeros((3, 2, NQ))
    Jw = np.zeros((3, NQ))
    com = (0, 3, 4)
    for b in range(3):
        p = pts[com[b]]
        Jv[b, 0, 0] = 1.0
        Jv[b, 1, 1] = 1.0
        px, pz = _perp(p[0] - pts[0, 0], p[1] - pts[0, 1])
        Jv[b, 0, 2] = px
        Jv[b, 1, 2] = pz
        Jw[b, 2] = 1.0
        if b >= 1:
            px, pz = _perp(p[0] - pts[1, 0], p[1] - pts[1, 1])
            Jv[b, 0, 3] = px
            Jv[b, 1, 3] = pz
            Jw[b, 3] = 1.0
        if b == 2:
            px, pz = _perp(p[0] - pts[2, 0], p[1] - pts[2, 1])
            Jv[b, 0, 4] = px
            Jv[b, 1, 4] = pz
            Jw[b, 4] = 1.0
    return pts, Jv, Jw


@njit(cache=True)
def _bias_accel(pts, qd):
    """Velocity-product acceleration (q_dd = 0) of the three CoMs."""
    wb = qd[2]
    wn = wb + qd[3]
    wh = wn + qd[4]
    acc = np.zeros((3, 2))
    # bike CoM -> mu pivot rotates with the bike; pivot -> neck CoM with the neck ...
    rbx = pts[1, 0] - pts[0, 0]
    rbz = pts[1, 1] - pts[0, 1]
    rkx = pts[2, 0] - pts[1, 0]
    rkz = pts[2, 1] - pts[1, 1]
    rnx = pts[3, 0] - pts[1, 0]
    rnz = pts[3, 1] - pts[1, 1]
    rhx = pts[4, 0] - pts[2, 0]
    rhz = pts[4, 1] - pts[2, 1]
    acc[1, 0] = -wb * wb * rbx - wn * wn * rnx
    acc[1, 1] = -wb * wb * rbz - wn * wn * rnz
    acc[2, 0] = -wb * wb * rbx - wn * wn * rkx - wh * wh * rhx
    acc[2, 1] = -wb * wb * rbz - wn * wn * rkz - wh * wh * rhz
    return acc


@njit(cache=True)
def mass_matrix(q, P):
    pts, Jv, Jw = body_jacobians(q, P)
    M = np.zeros((NQ, NQ))
    masses = (P[P_MB], P[P_MN], P[P_MH])
    inert = (P[P_IB], P[P_IN], P[P_IH])
    for b in range(3):
        M += masses[b] * (Jv[b].T @ Jv[b]) + inert[b] * np.outer(Jw[b], Jw[b])
    M[3, 3] += P[P_RMU]
    M[4, 4] += P[P_RQH]
    return M


@njit(cache=True)
def dynamics_terms(q, qd, P):
    """Mass matrix, velocity-product + gravity vector ``h`` and the points."""
    pts, Jv, Jw = body_jacobians(q, P)
    M = np.zeros((NQ, NQ))
    h = np.zeros(NQ)
    masses = (P[P_MB], P[P_MN], P[P_MH])
    inert = (P[P_IB], P[P_IN], P[P_IH])
    acc = _bias_accel(pts, qd)
    g = P[P_G]
    for b in range(3):
        M += masses[b] * (Jv[b].T @ Jv[b]) + inert[b] * np.outer(Jw[b], Jw[b])
        f = np.array((acc[b, 0], acc[b, 1] + g)) * masses[b]
        h += Jv[b].T @ f
    M[3, 3] += P[P_RMU]
    M[4, 4] += P[P_RQH]
    return M, h, pts


@njit(cache=True)
def gravity_joint_torques(q, P):
    """Joint rows of the gravity generalized force (holding torques with the Bike fixed)."""
    pts, Jv, Jw = body_jacobians(q, P)
    g = P[P_G]
    out = np.zeros(2)
    masses = (P[P_MB], P[P_MN], P[P_MH])
    for b in range(3):
        out[0] += masses[b] * g * Jv[b, 1, 3]
        out[1] += masses[b] * g * Jv[b, 1, 4]
    return out


@njit(cache=True)
def contact_forces(q, qd, P):
    """Penalty forces at both wheels.

    Returns (normal[2], tangential[2], generalized force[NQ]). The contact point
    is the lowest point of each wheel, treated as a point of the (braked) Bike.
    """
    pts, th, an, ah = kinematics(q, P)
    r = P[P_R]
    k = P[P_K]
    c = P[P_C]
    mu = P[P_FRIC]
    fn = np.zeros(2)
    ft = np.zeros(2)
    gen = np.zeros(NQ)
    for w in range(2):
        ax = pts[5 + w, 0]
        az = pts[5 + w, 1]
        pen = r - az
        if pen <= 0.0:
            continue
        cx = ax
        cz = az - r
        rx = cx - q[0]
        rz = cz - q[1]
        px, pz = _perp(rx, rz)
        vx = qd[0] + qd[2] * px
        vz = qd[1] + qd[2] * pz
        n = k * pen - c * vz
        if n <= 0.0:
            continue
        t = -c * vx
        lim = mu * n
        if t > lim:
            t = lim
        elif t < -lim:
            t = -lim
        fn[w] = n
        ft[w] = t
        gen[0] += t
        gen[1] += n
        gen[2] += px * t + pz * n
    return fn, ft, gen


@njit(cache=True)
def envelope(tmax, wmax, w):
    d = 1.0 - abs(w) / wmax
    if d < 0.0:
        d = 0.0
    return tmax * d


@njit(cache=True)
def clamp_torques(tau, qd, P):
    out = np.empty(2)
    lim0 = envelope(P[P_TMAX_MU], P[P_WMAX_MU], qd[3])
    lim1 = envelope(P[P_TMAX_QH], P[P_WMAX_QH], qd[4])
    out[0] = min(max(tau[0], -lim0), lim0)
    out[1] = min(max(tau[1], -lim1), lim1)
    return out


@njit(cache=True)
def accelerations(q, qd, tau, gen_contact, P):
    M, h, pts = dynamics_terms(q, qd, P)
    rhs = gen_contact - h
    rhs[3] += tau[0]
    rhs[4] += tau[1]
    return np.linalg.solve(M, rhs)


@njit(cache=True)
def enforce_limits(q, qd, P, dt):
    """Stop joints at their limits: ``qd`` is the velocity about to be integrated
    from ``q``. A joint that would pass a limit gets the velocity that lands it
    exactly on the limit, delivered as an internal impulse so linear and angular
    momentum are preserved at the landing pose. Returns the new position; ``qd``
    is updated in place."""
    lo = (P[P_LO_MU], P[P_LO_QH])
    hi = (P[P_HI_MU], P[P_HI_QH])
    q_new = q + dt * qd
    target = np.zeros(2)
    limit = np.zeros(2)
    active = np.zeros(2, dtype=np.bool_)
    n_active = 0
    for j in range(2):
        idx = 3 + j
        if q_new[idx] < lo[j] and qd[idx] < 0.0:
            limit[j] = lo[j]
        elif q_new[idx] > hi[j] and qd[idx] > 0.0:
            limit[j] = hi[j]
        else:
            continue
        target[j] = (limit[j] - q[idx]) / dt
        active[j] = True
        n_active += 1
    if n_active == 0:
        return q_new
    idx = np.empty(n_active, dtype=np.int64)
    k = 0
    for j in range(2):
        if active[j]:
            idx[k] = 3 + j
            k += 1
    # momentum of the unconstrained step: linear, and angular about the CoM
    qd0 = qd.copy()
    mom = mass_matrix(q_new, P)[:3] @ qd0
    cx, cz, _, _ = com_state(q_new, qd0, P)
    l_com = mom[2] - ((cx - q_new[0]) * mom[1] - (cz - q_new[1]) * mom[0])
    A = np.empty((n_active, n_active))
    b = np.empty(n_active)
    # project onto the joint targets with that momentum held at the landing
    # pose; the pose depends on the result, but only at O(dt), so a few
    # fixed-point passes converge to round-off
    for _ in range(4):
        M = mass_matrix(q_new, P)
        Minv = np.linalg.inv(M)
        cx, cz, _, _ = com_state(q_new, qd0, P)
        want = mom.copy()
        want[2] = l_com + (cx - q_new[0]) * mom[1] - (cz - q_new[1]) * mom[0]
        alpha = want - M[:3] @ qd0
        for i in range(NQ):
            qd[i] = qd0[i]
            for r in range(3):
                qd[i] += Minv[i, r] * alpha[r]
        for a in range(n_active):
            b[a] = target[idx[a] - 3] - qd[idx[a]]
            for c in range(n_active):
                A[a, c] = Minv[idx[a], idx[c]]
        lam = np.linalg.solve(A, b)
        for i in range(NQ):
            for a in range(n_active):
                qd[i] += Minv[i, idx[a]] * lam[a]
        for a in range(n_active):
            qd[idx[a]] = target[idx[a] - 3]
        q_new = q + dt * qd
    for a in range(n_active):
        q_new[idx[a]] = limit[idx[a] - 3]
    return q_new


@njit(cache=True)
def step_kernel(q, qd, tau, P, dt):
    """One semi-implicit Euler step. ``tau`` must already be envelope-clamped.

    Returns new (q, qd), the contact normal and tangential forces used."""
    fn, ft, gen = contact_forces(q, qd, P)
    qdd = accelerations(q, qd, tau, gen, P)
    qd_new = qd + dt * qdd
    q_new = enforce_limits(q, qd_new, P, dt)
    return q_new, qd_new, fn, ft


@njit(cache=True)
def com_state(q, qd, P):
    """Whole-body CoM position and velocity."""
    pts, Jv, Jw = body_jacobians(q, P)
    masses = (P[P_MB], P[P_MN], P[P_MH])
    com = (0, 3, 4)
    mt = 0.0
    px = pz = vx = vz = 0.0
    for b in range(3):
        m = masses[b]
        mt += m
        px += m * pts[com[b], 0]
        pz += m * pts[com[b], 1]
        v = Jv[b] @ qd
        vx += m * v[0]
        vz += m * v[1]
    return px / mt, pz / mt, vx / mt, vz / mt


@njit(cache=True)
def head_jacobian_joints(q, P):
    """2x2 Jacobian of the Head CoM w.r.t. (mu, q_h) with the Bike held fixed."""
    pts, Jv, Jw = body_jacobians(q, P)
    J = np.empty((2, 2))
    J[0, 0] = Jv[2, 0, 3]
    J[1, 0] = Jv[2, 1, 3]
    J[0, 1] = Jv[2, 0, 4]
    J[1, 1] = Jv[2, 1, 4]
    return J, pts[4, 0], pts[4, 1]


@njit(cache=True)
def simulate_kernel(
    P, q0, qd0, dt, t_max, mode, crouch, extend, trigger, ramp, gravity_comp,
    force_z, stroke, kx, dx, max_samples, tuck, tuck_on,
):
    """Crouch-to-apogee integration loop.

    Records every step. Stops one step after apogee (CoM vertical velocity
    changes sign in flight) or at ``t_max``. Returns the filled sample arrays,
    the number of samples, and the event record
    ``[t_liftoff, t_apogee, lifted(0/1), apogee_found(0/1), diverged(0/1)]``.
    """
    n_steps = int(math.ceil(t_max / dt)) + 1
    if n_steps > max_samples:
        n_steps = max_samples
    T = np.empty(n_steps)
    Q = np.empty((n_steps, NQ))
    QD = np.empty((n_steps, NQ))
    TAU = np.zeros((n_steps, 2))
    FN = np.zeros((n_steps, 2))
    FT = np.zeros((n_steps, 2))
    events = np.zeros(5)
    q = q0.copy()
    qd = qd0.copy()
    reached = np.zeros(2, dtype=np.bool_)
    locked = False
    lock_q = np.zeros(2)
    head_z0 = 0.0
    head_x0 = 0.0
    if mode == MODE_VERTICAL_FORCE:
        J, hx, hz = head_jacobian_joints(q, P)
        head_x0 = hx
        head_z0 = hz
    lifted = False
    rising = False
    prev_vz = 0.0
    _, cz0, _, _ = com_state(q, qd, P)
    n = 0
    t = 0.0
    while n < n_steps:
        fn, ft, gen = contact_forces(q, qd, P)
        in_contact = fn[0] > 0.0 or fn[1] > 0.0
        tau = np.zeros(2)
        if lifted:
            # flight: retract toward the tuck pose, or go limp
            if tuck_on:
                for j in range(2):
                    tau[j] = P[P_KP_MU + 4 * j] * (tuck[j] - q[3 + j]) - P[P_KD_MU + 4 * j] * qd[3 + j]
        elif t < trigger:
            for j in range(2):
                tau[j] = P[P_KP_MU + 4 * j] * (crouch[j] - q[3 + j]) - P[P_KD_MU + 4 * j] * qd[3 + j]
            if gravity_comp and in_contact:
                tau += gravity_joint_torques(q, P)
        elif mode == MODE_PD_RAMP:
            s = (t - trigger) / ramp
            moving = s < 1.0
            if s > 1.0:
                s = 1.0
            for j in range(2):
                qdes = crouch[j] + s * (extend[j] - crouch[j])
                qddes = (extend[j] - crouch[j]) / ramp if moving else 0.0
                tau[j] = P[P_KP_MU + 4 * j] * (qdes - q[3 + j]) + P[P_KD_MU + 4 * j] * (qddes - qd[3 + j])
            if gravity_comp and in_contact:
                tau += gravity_joint_torques(q, P)
        elif mode == MODE_BANG_BANG:
            for j in range(2):
                err = extend[j] - q[3 + j]
                if not reached[j]:
                    if err * (extend[j] - crouch[j]) <= 0.0:
                        reached[j] = True
                if reached[j]:
                    tau[j] = P[P_KP_MU + 4 * j] * err - P[P_KD_MU + 4 * j] * qd[3 + j]
                else:
                    tau[j] = 1e12 if err > 0.0 else -1e12
        else:
            J, hx, hz = head_jacobian_joints(q, P)
            if not locked and hz - head_z0 >= stroke:
                locked = True
                lock_q[0] = q[3]
                lock_q[1] = q[4]
            if locked:
                for j in range(2):
                    tau[j] = P[P_KP_MU + 4 * j] * (lock_q[j] - q[3 + j]) - P[P_KD_MU + 4 * j] * qd[3 + j]
            else:
                vh = J @ qd[3:5]
                # bike velocity is ~0 in stance; correction keeps the head path vertical
                fx = -kx * (hx - head_x0) - dx * (vh[0] + qd[0])
                tau[0] = J[0, 0] * fx + J[1, 0] * force_z
                tau[1] = J[0, 1] * fx + J[1, 1] * force_z
        tau = clamp_torques(tau, qd, P)
        T[n] = t
        Q[n] = q
        QD[n] = qd
        TAU[n] = tau
        FN[n] = fn
        FT[n] = ft
        cx, cz, vx, vz = com_state(q, qd, P)
        if vz > RISE_SPEED:
            rising = True
        # a bounce that never lifts the CoM above the settled crouch is not a jump
        if not lifted and not in_contact and n > 0 and vz > 0.0 and cz > cz0:
            lifted = True
            events[0] = t
            events[2] = 1.0
        elif lifted and prev_vz > 0.0 and vz <= 0.0:
            # apogee: first turn of the CoM after lift-off, even if a wheel touched down
            events[1] = t - dt + dt * prev_vz / (prev_vz - vz)
            events[3] = 1.0
            n += 1
            break
        elif not lifted and rising and vz <= 0.0:
            # the push peaked without leaving the ground: failed attempt
            events[1] = t
            n += 1
            break
        prev_vz = vz
        n += 1
        qdd = accelerations(q, qd, tau, gen, P)
        qd_new = qd + dt * qdd
        q_new = enforce_limits(q, qd_new, P, dt)
        ok = True
        for i in range(NQ):
            if not (math.isfinite(q_new[i]) and math.isfinite(qd_new[i])):
                ok = False
        if not ok:
            events[4] = 1.0
            events[1] = t + dt
            break
        q = q_new
        qd = qd_new
        t = (n) * dt
    return T[:n], Q[:n], QD[:n], TAU[:n], FN[:n], FT[:n], events


@njit(cache=True)
def observables_batch(Q, QD, TAU, P):
    """Per-sample CoM height, rear clearance height and mechanical power."""
    n = Q.shape[0]
    h_com = np.empty(n)
    h_clear = np.empty(n)
    power = np.empty(n)
    mt = P[P_MB] + P[P_MN] + P[P_MH]
    for i in range(n):
        pts, _, _, _ = kinematics(Q[i], P)
        h_com[i] = (P[P_MB] * pts[0, 1] + P[P_MN] * pts[3, 1] + P[P_MH] * pts[4, 1]) / mt
        h_clear[i] = pts[5, 1] - P[P_R]
        power[i] = abs(TAU[i, 0] * QD[i, 3]) + abs(TAU[i, 1] * QD[i, 4])
    return h_com, h_clear, power
