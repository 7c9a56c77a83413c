"""Sagittal rigid-body dynamics of the Bike-Neck-Head chain with penalty contact.

The Bike is a floating base carrying two wheels at +/- wheelbase/2 from its
CoM; the Neck hangs off the Bike through ``mu`` and the Head off the Neck
through ``q_h``. Wheels are braked and the front wheel is massless. Ground is
the plane z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _planar_kernels as K
from .errors import InvalidSpecError, NumericalSingularityError, SimulationDivergedError
from .morphology import MorphologySpec


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    gravity: float = 9.81
    friction_coefficient: float = 1.0
    contact_stiffness: float = 1e5
    contact_damping: float = 1e3

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidSpecError(f"dt must be positive, got {self.dt!r}")
        if not self.gravity > 0:
            raise InvalidSpecError(f"gravity must be positive, got {self.gravity!r}")
        if self.friction_coefficient < 0 or self.contact_stiffness < 0 or self.contact_damping < 0:
            raise InvalidSpecError("friction, stiffness and damping must be non-negative")


@dataclass
class PlanarState:
    """Bike pose ``(x, z, pitch)``, joints ``(mu, q_h)`` and their rates."""

    base_pose: np.ndarray
    joint_pos: np.ndarray
    base_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joint_vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    time: float = 0.0

    def __post_init__(self):
        self.base_pose = np.asarray(self.base_pose, dtype=float).reshape(3)
        self.joint_pos = np.asarray(self.joint_pos, dtype=float).reshape(2)
        self.base_vel = np.asarray(self.base_vel, dtype=float).reshape(3)
        self.joint_vel = np.asarray(self.joint_vel, dtype=float).reshape(2)

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.base_pose, self.joint_pos])

    @property
    def qd(self) -> np.ndarray:
        return np.concatenate([self.base_vel, self.joint_vel])

    @classmethod
    def from_vectors(cls, q, qd, time: float = 0.0) -> "PlanarState":
        q = np.asarray(q, dtype=float)
        qd = np.asarray(qd, dtype=float)
        return cls(q[:3].copy(), q[3:].copy(), qd[:3].copy(), qd[3:].copy(), float(time))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qd)))


@dataclass(frozen=True)
class ContactReport:
    rear_in_contact: bool
    front_in_contact: bool
    normal_forces: tuple[float, float]
    tangential_forces: tuple[float, float]

    @classmethod
    def from_forces(cls, fn, ft) -> "ContactReport":
        return cls(bool(fn[0] > 0), bool(fn[1] > 0), (float(fn[0]), float(fn[1])), (float(ft[0]), float(ft[1])))

    @classmethod
    def none(cls) -> "ContactReport":
        return cls(False, False, (0.0, 0.0), (0.0, 0.0))


def model_params(m: MorphologySpec, cfg: SimConfig) -> np.ndarray:
    """Flatten a morphology and sim config into the kernel parameter vector."""
    P = np.zeros(K.NPARAM)
    bike = m.link_inertia("bike")
    neck = m.link_inertia("neck")
    head = m.link_inertia("head")
    P[K.P_G] = cfg.gravity
    P[K.P_MB], P[K.P_IB] = bike.mass, bike.inertia_about_com
    P[K.P_WB], P[K.P_R] = m.wheelbase, m.wheel_radius
    P[K.P_MDX], P[K.P_MDZ] = m.mu.offset
    P[K.P_MN], P[K.P_IN], P[K.P_CN] = neck.mass, neck.inertia_about_com, neck.com_offset
    P[K.P_KX], P[K.P_KZ] = m.q_h.offset
    P[K.P_MH], P[K.P_IH], P[K.P_CH] = head.mass, head.inertia_about_com, head.com_offset
    P[K.P_RMU] = m.mu_actuator.reflected_inertia
    P[K.P_RQH] = m.q_h_actuator.reflected_inertia
    P[K.P_K], P[K.P_C], P[K.P_FRIC] = cfg.contact_stiffness, cfg.contact_damping, cfg.friction_coefficient
    P[K.P_LO_MU], P[K.P_HI_MU] = m.mu.lower, m.mu.upper
    P[K.P_LO_QH], P[K.P_HI_QH] = m.q_h.lower, m.q_h.upper
    for base, act in ((K.P_TMAX_MU, m.mu_actuator), (K.P_TMAX_QH, m.q_h_actuator)):
        P[base] = act.total_torque
        P[base + 1] = act.max_output_speed
        P[base + 2] = act.kp
        P[base + 3] = act.kd
    return P


def mass_matrix(m: MorphologySpec, s: PlanarState) -> np.ndarray:
    """Joint-space inertia including reflected rotor inertia on the actuated joints."""
    return K.mass_matrix(s.q, model_params(m, SimConfig()))


def contact_report(m: MorphologySpec, s: PlanarState, cfg: SimConfig) -> ContactReport:
    fn, ft, _ = K.contact_forces(s.q, s.qd, model_params(m, cfg))
    return ContactReport.from_forces(fn, ft)


def _contact_generalized(q: np.ndarray, P: np.ndarray, contacts: ContactReport) -> np.ndarray:
    pts, _, _, _ = K.kinematics(q, P)
    gen = np.zeros(K.NQ)
    r = P[K.P_R]
    for w in range(2):
        fn = contacts.normal_forces[w]
        ft = contacts.tangential_forces[w]
        if fn == 0.0 and ft == 0.0:
            continue
        rx = pts[5 + w, 0] - q[0]
        rz = pts[5 + w, 1] - r - q[1]
        gen[0] += ft
        gen[1] += fn
        gen[2] += -rz * ft + rx * fn
    return gen


def forward_dynamics_planar(
    m: MorphologySpec,
    s: PlanarState,
    torques,
    contacts: ContactReport | None,
    cfg: SimConfig,
) -> np.ndarray:
    """Generalized accelerations ``(x, z, pitch, mu, q_h)``.

    ``torques`` are joint torques on ``(mu, q_h)``; ``contacts`` supplies the
    ground forces (``None`` evaluates the penalty model at ``s``).
    """
    P = model_params(m, cfg)
    q, qd = s.q, s.qd
    if contacts is None:
        _, _, gen = K.contact_forces(q, qd, P)
    else:
        gen = _contact_generalized(q, P, contacts)
    M, h, _ = K.dynamics_terms(q, qd, P)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalSingularityError("mass matrix is not positive definite") from exc
    rhs = gen - h
    rhs[3:] += np.asarray(torques, dtype=float)
    return np.linalg.solve(M, rhs)


def clamp_to_envelope(m: MorphologySpec, s: PlanarState, torques) -> np.ndarray:
    P = model_params(m, SimConfig())
    return K.clamp_torques(np.asarray(torques, dtype=float), s.qd, P)


def step(
    m: MorphologySpec,
    s: PlanarState,
    torques,
    cfg: SimConfig,
    params: np.ndarray | None = None,
) -> tuple[PlanarState, ContactReport]:
    """Advance one semi-implicit Euler step.

    The returned report holds the contact forces applied during the step.
    ``params`` may carry a precomputed :func:`model_params` vector.
    """
    if not 0 < cfg.dt <= 1e-2:
        raise InvalidSpecError(f"dt must lie in (0, 1e-2], got {cfg.dt!r}")
    P = model_params(m, cfg) if params is None else params
    q, qd, fn, ft = K.step_kernel(s.q, s.qd, np.asarray(torques, dtype=float), P, cfg.dt)
    t = s.time + cfg.dt
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise SimulationDivergedError(t)
    return PlanarState.from_vectors(q, qd, t), ContactReport.from_forces(fn, ft)


def _points(m: MorphologySpec, q: np.ndarray) -> np.ndarray:
    pts, _, _, _ = K.kinematics(q, model_params(m, SimConfig()))
    return pts


def kinematic_observables(m: MorphologySpec, s: PlanarState) -> dict:
    """Whole-body CoM and rear-wheel clearance point."""
    pts = _points(m, s.q)
    masses = np.array([m.link_inertia(n).mass for n in ("bike", "neck", "head")])
    coms = pts[[0, 3, 4]]
    p_com = masses @ coms / masses.sum()
    p_clear = np.array([pts[5, 0], pts[5, 1] - m.wheel_radius])
    return {
        "p_com": p_com,
        "h_com": float(p_com[1]),
        "p_clearance": p_clear,
        "h_clearance": float(p_clear[1]),
    }


def conserved_quantities(m: MorphologySpec, s: PlanarState, gravity: float = 9.81) -> dict:
    """Mechanical energy, centroidal angular momentum and composite pitch inertia.

    Kinetic energy includes the reflected rotor inertia of the actuated joints.
    """
    P = model_params(m, SimConfig(gravity=gravity))
    q, qd = s.q, s.qd
    pts, Jv, Jw = K.body_jacobians(q, P)
    M = K.mass_matrix(q, P)
    names = ("bike", "neck", "head")
    masses = np.array([m.link_inertia(n).mass for n in names])
    inertias = np.array([m.link_inertia(n).inertia_about_com for n in names])
    coms = pts[[0, 3, 4]]
    mt = masses.sum()
    c = masses @ coms / mt
    vels = np.einsum("bij,j->bi", Jv, qd)
    vc = masses @ vels / mt
    omegas = Jw @ qd
    L = 0.0
    I = 0.0
    for b in range(3):
        r = coms[b] - c
        v = vels[b] - vc
        L += masses[b] * (r[0] * v[1] - r[1] * v[0]) + inertias[b] * omegas[b]
        I += masses[b] * (r @ r) + inertias[b]
    energy = 0.5 * qd @ M @ qd + mt * gravity * c[1]
    return {
        "mechanical_energy": float(energy),
        "centroidal_angular_momentum": float(L),
        "centroidal_inertia_pitch": float(I),
    }


def static_stance(
    m: MorphologySpec,
    joint_pos,
    cfg: SimConfig,
    x: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> PlanarState:
    """Place the robot at rest on both wheels with the given joint angles.

    Solves for Bike height and pitch so the penalty springs exactly carry the
    weight (force and moment balance). Joint holding torques are
    :func:`gravity_compensation`.
    """
    P = model_params(m, cfg)
    joint_pos = np.asarray(joint_pos, dtype=float)
    q = np.array([x, m.wheel_radius, 0.0, joint_pos[0], joint_pos[1]])
    zero = np.zeros(K.NQ)
    pts, _, _, _ = K.kinematics(q, P)
    masses = np.array([P[K.P_MB], P[K.P_MN], P[K.P_MH]])
    com_x = masses @ pts[[0, 3, 4], 0] / masses.sum()
    if not pts[5, 0] < com_x < pts[6, 0]:
        raise InvalidSpecError("CoM lies outside the wheelbase; no two-wheel stance exists")

    def residual(v):
        qq = q.copy()
        qq[1], qq[2] = v
        _, _, gen = K.contact_forces(qq, zero, P)
        _, h, _ = K.dynamics_terms(qq, zero, P)
        r = gen - h
        return np.array([r[1], r[2]])

    v = np.array([m.wheel_radius - m.total_mass * cfg.gravity / (2 * cfg.contact_stiffness), 0.0])
    for _ in range(max_iter):
        r = residual(v)
        if np.max(np.abs(r)) < tol * m.total_mass * cfg.gravity:
            break
        J = np.empty((2, 2))
        for i, eps in enumerate((1e-9, 1e-9)):
            dv = np.zeros(2)
            dv[i] = eps
            J[:, i] = (residual(v + dv) - residual(v - dv)) / (2 * eps)
        v = v - np.linalg.solve(J, r)
    q[1], q[2] = v
    return PlanarState.from_vectors(q, zero)


def gravity_compensation(m: MorphologySpec, s: PlanarState, gravity: float = 9.81) -> np.ndarray:
    """Joint torques that hold ``(mu, q_h)`` against gravity with the Bike supported."""
    return K.gravity_joint_torques(s.q, model_params(m, SimConfig(gravity=gravity)))
