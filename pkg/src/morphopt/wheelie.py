"""Rear-wheel balance model for the controllability studies.

The rear wheel rolls along the world x axis without slip and can tip about the
contact line (roll); yaw is not modelled. The Bike pitches about the rear axle.
An out-of-plane joint ``phi`` sits between the Bike and ``mu``; its axis lies in
the Bike's sagittal plane at a fixed angle ``psi_hat`` from the Bike axis. An
optional extra joint ``zeta`` sits between the Neck and ``q_h`` with its axis at
``zeta_hat`` from the Neck axis.

Coordinates ``(roll, pitch, wheel, mu, phi, q_h[, zeta])``; ``wheel`` is the
wheel angle relative to the Bike. Inputs are torques on
``(wheel, mu, phi, q_h[, zeta])``. The state is ``x = (q, q_dot)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import optimize

from .actuators import R80_WHEEL
from .errors import InvalidSpecError, NumericalSingularityError
from .gramian import LinearizedSystem, linearize_dynamics
from .morphology import MorphologySpec

_NEG_Y = np.array([0.0, -1.0, 0.0])
_X = np.array([1.0, 0.0, 0.0])


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for ``angle`` about unit ``axis`` (Rodrigues)."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def _cylinder_tensor(mass: float, length: float, radius: float) -> np.ndarray:
    """Body-frame inertia of a solid cylinder whose axis is the local x axis."""
    axial = 0.5 * mass * radius**2
    transverse = mass * (length**2 / 12.0 + radius**2 / 4.0)
    return np.diag([axial, transverse, transverse])


@dataclass(frozen=True)
class WheelieModel:
    morphology: MorphologySpec
    psi_hat: float
    zeta_hat: float | None = None
    wheel_inertia: float = 0.01
    # extra diagonal inertia per coordinate name; None derives it from the actuators
    armature: Mapping[str, float] | None = None
    gravity: float = 9.81

    def __post_init__(self):
        if not -math.pi / 2 - 1e-12 <= self.psi_hat <= math.pi / 2 + 1e-12:
            raise InvalidSpecError(f"psi_hat must lie in [-pi/2, pi/2], got {self.psi_hat!r}")
        if self.zeta_hat is not None and not -math.pi / 2 - 1e-12 <= self.zeta_hat <= math.pi / 2 + 1e-12:
            raise InvalidSpecError(f"zeta_hat must lie in [-pi/2, pi/2], got {self.zeta_hat!r}")

    @property
    def has_extra(self) -> bool:
        return self.zeta_hat is not None

    @property
    def coordinate_names(self) -> tuple[str, ...]:
        base = ("roll", "pitch", "wheel", "mu", "phi", "q_h")
        return base + ("zeta",) if self.has_extra else base

    @property
    def input_names(self) -> tuple[str, ...]:
        base = ("wheel", "mu", "phi", "q_h")
        return base + ("zeta",) if self.has_extra else base

    @property
    def state_names(self) -> tuple[str, ...]:
        names = self.coordinate_names
        return names + tuple(f"d_{n}" for n in names)

    @property
    def nq(self) -> int:
        return len(self.coordinate_names)

    @property
    def nu(self) -> int:
        return len(self.input_names)

    def input_matrix(self) -> np.ndarray:
        """Map from inputs to generalized forces (``nq x nu``)."""
        S = np.zeros((self.nq, self.nu))
        for j, name in enumerate(self.input_names):
            S[self.coordinate_names.index(name), j] = 1.0
        return S

    def armature_vector(self) -> np.ndarray:
        m = self.morphology
        if self.armature is not None:
            return np.array([float(self.armature.get(n, 0.0)) for n in self.coordinate_names])
        alpha = m.mu_actuator.reflected_inertia
        values = {
            "wheel": R80_WHEEL.reflected_inertia + self.wheel_inertia,
            "mu": alpha,
            "phi": alpha,
            "q_h": m.q_h_actuator.reflected_inertia,
            "zeta": m.mu_actuator.with_count(1).reflected_inertia,
        }
        return np.array([values.get(n, 0.0) for n in self.coordinate_names])

    def with_psi(self, psi_hat: float) -> "WheelieModel":
        return WheelieModel(self.morphology, psi_hat, self.zeta_hat, self.wheel_inertia, self.armature, self.gravity)

    def without_extra(self) -> "WheelieModel":
        return WheelieModel(self.morphology, self.psi_hat, None, self.wheel_inertia, self.armature, self.gravity)

    def axle_intersect_angle(self) -> float:
        """Axis angle for which the ``phi`` axis line passes through the rear axle."""
        dx, dz = self.morphology.mu.offset
        if dx == 0.0:
            return math.pi / 2
        return math.atan(dz / dx)


@dataclass
class _Body:
    frame: int
    com: np.ndarray
    mass: float
    inertia: np.ndarray


class _Kinematics:
    """Frames of the tree, evaluated for one configuration."""

    def __init__(self, model: WheelieModel):
        self.model = model
        m = model.morphology
        r = m.wheel_radius
        self.r = r
        extra = model.has_extra
        # chain variables: x_P, roll, pitch, wheel, phi, mu, [zeta], q_h
        psi = model.psi_hat
        phi_axis = np.array([math.cos(psi), 0.0, math.sin(psi)])
        kx, kz = m.q_h.offset
        knee = np.array([kx, 0.0, kz])
        mdx, mdz = m.mu.offset
        mount = np.array([mdx, 0.0, mdz])
        # (parent, kind, axis in parent, origin in parent)
        self.joints = [
            (-1, "P", _X, np.zeros(3)),
            (0, "R", _X, np.zeros(3)),
            (1, "R", _NEG_Y, np.array([0.0, 0.0, r])),
            (2, "R", _NEG_Y, np.zeros(3)),
            (2, "R", phi_axis, mount),
            (4, "R", _NEG_Y, np.zeros(3)),
        ]
        if extra:
            zeta = model.zeta_hat
            self.joints.append((5, "R", np.array([math.cos(zeta), 0.0, math.sin(zeta)]), knee))
            self.joints.append((6, "R", _NEG_Y, np.zeros(3)))
        else:
            self.joints.append((5, "R", _NEG_Y, knee))
        head_frame = len(self.joints) - 1
        bike = m.link_inertia("bike")
        neck = m.link_inertia("neck")
        head = m.link_inertia("head")

        def tensor(name, li, cyl):
            if name in m.inertia_overrides:
                return np.diag([0.0, li.inertia_about_com, li.inertia_about_com])
            return _cylinder_tensor(cyl.mass, cyl.length, cyl.radius)

        # the Bike CoM sits midway between the axles
        self.bodies = [
            _Body(2, np.array([m.wheelbase / 2, 0.0, 0.0]), bike.mass, tensor("bike", bike, m.bike)),
            _Body(3, np.zeros(3), 0.0, np.diag([0.5 * model.wheel_inertia, model.wheel_inertia, 0.5 * model.wheel_inertia])),
            _Body(5, np.array([neck.com_offset, 0.0, 0.0]), neck.mass, tensor("neck", neck, m.neck)),
            _Body(head_frame, np.array([head.com_offset, 0.0, 0.0]), head.mass, tensor("head", head, m.head)),
        ]
        nq = model.nq
        self.nchain = len(self.joints)
        # chain = T @ q_gen ; q_gen = (roll, pitch, wheel, mu, phi, q_h[, zeta])
        T = np.zeros((self.nchain, nq))
        T[0, 1] = -r
        T[0, 2] = -r
        T[1, 0] = 1.0
        T[2, 1] = 1.0
        T[3, 2] = 1.0
        T[4, 4] = 1.0
        T[5, 3] = 1.0
        if extra:
            T[6, 6] = 1.0
            T[7, 5] = 1.0
        else:
            T[6, 5] = 1.0
        self.T = T
        self.ancestors = []
        for j in range(self.nchain):
            chain = []
            k = j
            while k >= 0:
                chain.append(k)
                k = self.joints[k][0]
            self.ancestors.append(chain)

    def frames(self, c: np.ndarray):
        """World rotation and origin of each joint frame plus world joint axes/origins."""
        n = self.nchain
        R = [None] * n
        p = [None] * n
        axes = [None] * n
        origins = [None] * n
        for j, (parent, kind, axis, origin) in enumerate(self.joints):
            Rp = np.eye(3) if parent < 0 else R[parent]
            pp = np.zeros(3) if parent < 0 else p[parent]
            o = pp + Rp @ origin
            a = Rp @ axis
            axes[j] = a
            origins[j] = o
            if kind == "P":
                R[j] = Rp
                p[j] = o + a * c[j]
            else:
                R[j] = Rp @ _rot(axis, c[j])
                p[j] = o
        return R, p, axes, origins

    def jacobians(self, q: np.ndarray):
        """Per body: world CoM, world inertia, Jv (3 x nq), Jw (3 x nq)."""
        c = self.T @ q
        R, p, axes, origins = self.frames(c)
        out = []
        for b in self.bodies:
            com = p[b.frame] + R[b.frame] @ b.com
            Jv = np.zeros((3, self.nchain))
            Jw = np.zeros((3, self.nchain))
            for k in self.ancestors[b.frame]:
                if self.joints[k][1] == "P":
                    Jv[:, k] = axes[k]
                else:
                    Jv[:, k] = np.cross(axes[k], com - origins[k])
                    Jw[:, k] = axes[k]
            Iw = R[b.frame] @ b.inertia @ R[b.frame].T
            out.append((com, Iw, Jv @ self.T, Jw @ self.T))
        return out


class _Dynamics:
    def __init__(self, model: WheelieModel):
        self.model = model
        self.kin = _Kinematics(model)
        self.armature = model.armature_vector()
        self.S = model.input_matrix()

    def mass_matrix(self, q: np.ndarray) -> np.ndarray:
        M = np.diag(self.armature).astype(float)
        for (com, Iw, Jv, Jw), b in zip(self.kin.jacobians(q), self.kin.bodies):
            M += b.mass * Jv.T @ Jv + Jw.T @ Iw @ Jw
        return M

    def terms(self, q: np.ndarray, qd: np.ndarray):
        """Mass matrix, bias (velocity products + gravity) and potential energy."""
        g = self.model.gravity
        cur = self.kin.jacobians(q)
        speed = float(np.linalg.norm(qd))
        if speed > 0.0:
            eps = 1e-6 / max(speed, 1.0)
            fwd = self.kin.jacobians(q + eps * qd)
            bwd = self.kin.jacobians(q - eps * qd)
        M = np.diag(self.armature).astype(float)
        h = np.zeros(self.model.nq)
        V = 0.0
        for i, ((com, Iw, Jv, Jw), b) in enumerate(zip(cur, self.kin.bodies)):
            M += b.mass * Jv.T @ Jv + Jw.T @ Iw @ Jw
            V += b.mass * g * com[2]
            h += b.mass * g * Jv[2]
            if speed > 0.0:
                dJv = (fwd[i][2] - bwd[i][2]) / (2 * eps)
                dJw = (fwd[i][3] - bwd[i][3]) / (2 * eps)
                w = Jw @ qd
                h += b.mass * Jv.T @ (dJv @ qd)
                h += Jw.T @ (Iw @ (dJw @ qd) + np.cross(w, Iw @ w))
        return M, h, V

    def accel(self, q, qd, u):
        M, h, _ = self.terms(q, qd)
        rhs = self.S @ u - h
        try:
            c = np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalSingularityError("wheelie mass matrix is not positive definite") from exc
        y = np.linalg.solve(c, rhs)
        return np.linalg.solve(c.T, y)

    def com(self, q: np.ndarray) -> np.ndarray:
        total = 0.0
        acc = np.zeros(3)
        for (com, _, _, _), b in zip(self.kin.jacobians(q), self.kin.bodies):
            acc += b.mass * com
            total += b.mass
        return acc / total

    def contact_point(self, q: np.ndarray) -> np.ndarray:
        return np.array([(self.kin.T @ q)[0], 0.0, 0.0])


_DYN_CACHE: dict[int, tuple[WheelieModel, _Dynamics]] = {}


def _dynamics(model: WheelieModel) -> _Dynamics:
    key = id(model)
    hit = _DYN_CACHE.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]
    dyn = _Dynamics(model)
    if len(_DYN_CACHE) > 64:
        _DYN_CACHE.clear()
    _DYN_CACHE[key] = (model, dyn)
    return dyn


def wheelie_forward_dynamics(model: WheelieModel, x, u) -> np.ndarray:
    """State derivative ``(q_dot, q_ddot)`` for state ``x`` and input torques ``u``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    nq = model.nq
    if x.shape != (2 * nq,) or u.shape != (model.nu,):
        raise ValueError(f"expected x of size {2 * nq} and u of size {model.nu}")
    q, qd = x[:nq], x[nq:]
    return np.concatenate([qd, _dynamics(model).accel(q, qd, u)])


def mechanical_energy(model: WheelieModel, x) -> float:
    x = np.asarray(x, dtype=float)
    nq = model.nq
    q, qd = x[:nq], x[nq:]
    M, _, V = _dynamics(model).terms(q, np.zeros(nq))
    return float(0.5 * qd @ M @ qd + V)


def whole_body_com(model: WheelieModel, q) -> np.ndarray:
    return _dynamics(model).com(np.asarray(q, dtype=float))


def contact_point(model: WheelieModel, q) -> np.ndarray:
    return _dynamics(model).contact_point(np.asarray(q, dtype=float))


def gravity_forces(model: WheelieModel, q) -> np.ndarray:
    """Generalized gravity force (gradient of potential energy)."""
    _, h, _ = _dynamics(model).terms(np.asarray(q, dtype=float), np.zeros(model.nq))
    return h


@dataclass(frozen=True)
class WheelieConfig:
    """A statically balanced rear-wheel pose and the torques that hold it."""

    q: np.ndarray
    u_eq: np.ndarray
    contact: np.ndarray
    com_offset: float
    residual: float

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.q, np.zeros_like(self.q)])

    @property
    def pitch(self) -> float:
        return float(self.q[1])


def equilibrium_config(model: WheelieModel, q) -> WheelieConfig:
    """Package a balanced pose with its holding torques and diagnostics."""
    q = np.asarray(q, dtype=float)
    G = gravity_forces(model, q)
    S = model.input_matrix()
    u_eq = S.T @ G
    unact = [i for i, n in enumerate(model.coordinate_names) if n not in model.input_names]
    com = whole_body_com(model, q)
    cp = contact_point(model, q)
    return WheelieConfig(
        q=q,
        u_eq=u_eq,
        contact=cp,
        com_offset=float(np.hypot(com[0] - cp[0], com[1] - cp[1])),
        residual=float(np.max(np.abs(G[unact]))),
    )


def find_static_configs(
    model: WheelieModel,
    pitches: Sequence[float],
    q_h_values: Sequence[float] = (0.0,),
    mu_bracket: tuple[float, float] | None = None,
) -> list[WheelieConfig]:
    """Balanced wheelies: for each (pitch, q_h) solve ``mu`` so the CoM sits over the contact.

    Roll, ``phi`` and the extra joint stay at zero. Poses outside joint limits,
    without a sign change on the ``mu`` bracket, or with the front wheel on the
    ground are skipped.
    """
    m = model.morphology
    lo, hi = mu_bracket or (m.mu.lower, m.mu.upper)
    idx_mu = model.coordinate_names.index("mu")
    out: list[WheelieConfig] = []
    for pitch in pitches:
        if pitch <= 0:
            continue
        for qh in q_h_values:
            if not m.q_h.contains(qh):
                continue
            q = np.zeros(model.nq)
            q[1] = pitch
            q[model.coordinate_names.index("q_h")] = qh

            def offset(mu: float) -> float:
                qq = q.copy()
                qq[idx_mu] = mu
                return float(whole_body_com(model, qq)[0] - contact_point(model, qq)[0])

            grid = np.linspace(lo, hi, 65)
            vals = np.array([offset(v) for v in grid])
            roots = []
            for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
                if fa == 0.0:
                    roots.append(a)
                elif fa * fb < 0:
                    roots.append(optimize.brentq(offset, a, b, xtol=1e-14, rtol=1e-15))
            for mu in roots:
                if not m.mu.contains(mu):
                    continue
                qq = q.copy()
                qq[idx_mu] = mu
                out.append(equilibrium_config(model, qq))
                break
    return out


def linearize(
    model: WheelieModel,
    config: WheelieConfig,
    eps: float = 1e-6,
    dynamics: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> LinearizedSystem:
    """Central-difference linearization about ``(config.x, config.u_eq)``.

    The operating input is the holding torque, so ``u`` in the result is the
    deviation from it. ``dynamics`` replaces the wheelie model (for testing).
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    f = dynamics or (lambda x, u: wheelie_forward_dynamics(model, x, u))
    A, B = linearize_dynamics(f, config.x, config.u_eq, eps)
    return LinearizedSystem(A, B, config, model.state_names, model.input_names)
