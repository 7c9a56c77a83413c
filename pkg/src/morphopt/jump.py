"""Crouch-to-apogee jump simulation, jump metrics and the extension-profile search."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from . import _planar_kernels as K
from .actuators import ActuatorSpec, pd_torque
from .errors import DegenerateTraceError, InvalidSpecError, NoLiftoffError, SimulationDivergedError
from .inertia import CylinderSpec, LinkInertia
from .morphology import NOMINAL_CROUCH, NOMINAL_EXTEND, JointSpec, MorphologySpec
from .planar import ContactReport, PlanarState, SimConfig, conserved_quantities, model_params, static_stance, step

MODES = ("pd_tracked_ramp", "bang_bang")
_MODE_CODE = {"pd_tracked_ramp": K.MODE_PD_RAMP, "bang_bang": K.MODE_BANG_BANG}

# joint speed that marks motion onset from the settled crouch
ONSET_SPEED = 1e-3
DEFAULT_TIMEOUT = 1.5


@dataclass(frozen=True)
class ExtensionPolicy:
    mode: str
    crouch_config: tuple[float, float]
    extend_config: tuple[float, float]
    trigger_time: float = 0.01
    ramp_duration: float = 0.1
    # joint targets held after lift-off; None leaves the joints unpowered in flight
    tuck_config: tuple[float, float] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidSpecError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "crouch_config", tuple(float(v) for v in self.crouch_config))
        object.__setattr__(self, "extend_config", tuple(float(v) for v in self.extend_config))
        if self.tuck_config is not None:
            object.__setattr__(self, "tuck_config", tuple(float(v) for v in self.tuck_config))
        if self.trigger_time < 0:
            raise InvalidSpecError("trigger_time must be non-negative")
        if self.mode == "pd_tracked_ramp" and not self.ramp_duration > 0:
            raise InvalidSpecError("ramp_duration must be positive in pd_tracked_ramp mode")

    def check_limits(self, m: MorphologySpec) -> None:
        configs = [("crouch_config", self.crouch_config), ("extend_config", self.extend_config)]
        if self.tuck_config is not None:
            configs.append(("tuck_config", self.tuck_config))
        for label, cfg in configs:
            if not (m.mu.contains(cfg[0]) and m.q_h.contains(cfg[1])):
                raise InvalidSpecError(f"{label} {cfg} lies outside the joint limits")


def nominal_policy(mode: str = "pd_tracked_ramp", ramp_duration: float = 0.1) -> ExtensionPolicy:
    return ExtensionPolicy(mode, NOMINAL_CROUCH, NOMINAL_EXTEND, ramp_duration=ramp_duration)


@dataclass
class JumpTrace:
    """Sampled jump. Arrays are indexed by sample; ``q``/``qd`` use ``(x, z, pitch, mu, q_h)``."""

    time: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    torques: np.ndarray
    normal_forces: np.ndarray
    tangential_forces: np.ndarray
    h_com: np.ndarray
    h_clearance: np.ndarray
    power: np.ndarray
    t0: float
    t_liftoff: float
    t_apogee: float
    lifted: bool
    policy: ExtensionPolicy | None = None

    def __len__(self) -> int:
        return len(self.time)

    def state(self, i: int) -> PlanarState:
        return PlanarState.from_vectors(self.q[i], self.qd[i], self.time[i])

    def contact(self, i: int) -> ContactReport:
        return ContactReport.from_forces(self.normal_forces[i], self.tangential_forces[i])

    def records(self) -> Iterator[dict]:
        """JSON-compatible record stream: one header, one record per sample, one summary."""
        yield {
            "type": "header",
            "coordinates": ["x", "z", "pitch", "mu", "q_h"],
            "policy": None if self.policy is None else {
                "mode": self.policy.mode,
                "crouch_config": list(self.policy.crouch_config),
                "extend_config": list(self.policy.extend_config),
                "trigger_time": self.policy.trigger_time,
                "ramp_duration": self.policy.ramp_duration,
                "tuck_config": None if self.policy.tuck_config is None else list(self.policy.tuck_config),
            },
        }
        for i in range(len(self.time)):
            fn = self.normal_forces[i]
            yield {
                "type": "sample",
                "t": float(self.time[i]),
                "q": [float(v) for v in self.q[i]],
                "qd": [float(v) for v in self.qd[i]],
                "tau": [float(v) for v in self.torques[i]],
                "contact": [bool(fn[0] > 0), bool(fn[1] > 0)],
                "fn": [float(v) for v in fn],
                "ft": [float(v) for v in self.tangential_forces[i]],
                "h_com": float(self.h_com[i]),
                "h_clearance": float(self.h_clearance[i]),
            }
        yield {
            "type": "events",
            "t0": self.t0,
            "t_liftoff": self.t_liftoff,
            "t_apogee": self.t_apogee,
            "lifted": self.lifted,
        }

    def to_json(self) -> str:
        """A JSON array with one record per line."""
        body = ",\n".join(json.dumps(r, separators=(",", ":")) for r in self.records())
        return "[\n" + body + "\n]\n"

    @classmethod
    def from_records(cls, records) -> "JumpTrace":
        samples = []
        events = None
        policy = None
        for r in records:
            if r["type"] == "sample":
                samples.append(r)
            elif r["type"] == "events":
                events = r
            elif r["type"] == "header" and r.get("policy"):
                policy = ExtensionPolicy(**r["policy"])
        if events is None:
            raise ValueError("record stream has no events record")
        col = lambda key: np.array([s[key] for s in samples], dtype=float)
        n = len(samples)
        return cls(
            time=col("t").reshape(n),
            q=col("q").reshape(n, 5),
            qd=col("qd").reshape(n, 5),
            torques=col("tau").reshape(n, 2),
            normal_forces=col("fn").reshape(n, 2),
            tangential_forces=col("ft").reshape(n, 2),
            h_com=col("h_com").reshape(n),
            h_clearance=col("h_clearance").reshape(n),
            power=np.array([sum(abs(a * b) for a, b in zip(s["tau"], s["qd"][3:])) for s in samples]),
            t0=events["t0"],
            t_liftoff=events["t_liftoff"],
            t_apogee=events["t_apogee"],
            lifted=events["lifted"],
            policy=policy,
        )

    @classmethod
    def from_json(cls, text: str) -> "JumpTrace":
        return cls.from_records(json.loads(text))


@dataclass(frozen=True)
class JumpMetrics:
    max_h_com: float
    max_h_clearance: float
    contact_ratio: float
    peak_mechanical_power: float
    t_peak_power: float = 0.0
    lifted: bool = True

    def as_row(self) -> dict[str, float]:
        return {
            "max_h_com": self.max_h_com,
            "max_h_clearance": self.max_h_clearance,
            "contact_ratio": self.contact_ratio,
            "peak_mechanical_power": self.peak_mechanical_power,
        }


def _build_trace(P, T, Q, QD, TAU, FN, FT, events, policy) -> JumpTrace:
    h_com, h_clear, power = K.observables_batch(Q, QD, TAU, P)
    moving = np.nonzero(np.max(np.abs(QD[:, 3:]), axis=1) > ONSET_SPEED)[0]
    t0 = float(T[moving[0]]) if moving.size else float(T[-1])
    lifted = bool(events[2]) and bool(events[3])
    if lifted:
        t_lift = float(events[0])
        t_apo = float(events[1])
    else:
        t_lift = t_apo = float(T[-1])
    t0 = min(t0, t_lift)
    return JumpTrace(T, Q, QD, TAU, FN, FT, h_com, h_clear, power, t0, t_lift, t_apo, lifted, policy)


def simulate_jump(
    m: MorphologySpec,
    policy: ExtensionPolicy,
    cfg: SimConfig = SimConfig(),
    timeout: float = DEFAULT_TIMEOUT,
) -> JumpTrace:
    """Settle at the crouch on both wheels, extend, and integrate until apogee or ``timeout``.

    A jump that never leaves the ground returns a trace with ``lifted=False``
    (contact ratio 1). Divergence raises :class:`SimulationDivergedError`.
    """
    policy.check_limits(m)
    if not 0 < cfg.dt <= 1e-2:
        raise InvalidSpecError(f"dt must lie in (0, 1e-2], got {cfg.dt!r}")
    s0 = static_stance(m, policy.crouch_config, cfg)
    P = model_params(m, cfg)
    out = K.simulate_kernel(
        P, s0.q, s0.qd, cfg.dt, timeout, _MODE_CODE[policy.mode],
        np.array(policy.crouch_config), np.array(policy.extend_config),
        policy.trigger_time, policy.ramp_duration, True,
        0.0, 0.0, 0.0, 0.0, 10**7,
        np.array(policy.tuck_config or (0.0, 0.0)), policy.tuck_config is not None,
    )
    T, Q, QD, TAU, FN, FT, events = out
    if events[4]:
        raise SimulationDivergedError(float(events[1]))
    return _build_trace(P, T, Q, QD, TAU, FN, FT, events, policy)


def contact_ratio(trace: JumpTrace) -> float:
    """Share of the jump (onset to apogee) spent on the ground."""
    if not trace.lifted:
        return 1.0
    if trace.t_apogee <= trace.t0:
        raise DegenerateTraceError("apogee coincides with motion onset")
    return (trace.t_liftoff - trace.t0) / (trace.t_apogee - trace.t0)


def jump_metrics(trace: JumpTrace) -> JumpMetrics:
    if len(trace) == 0:
        raise DegenerateTraceError("empty trace")
    i_pow = int(np.argmax(trace.power))
    return JumpMetrics(
        max_h_com=float(np.max(trace.h_com)),
        max_h_clearance=float(np.max(trace.h_clearance)),
        contact_ratio=contact_ratio(trace),
        peak_mechanical_power=float(trace.power[i_pow]),
        t_peak_power=float(trace.time[i_pow]),
        lifted=trace.lifted,
    )


@dataclass(frozen=True)
class SearchSpace:
    """Candidate extension profiles, enumerated in a fixed order.

    Order: crouch (outer), extend, (mode, ramp) pairs, then tuck (inner).
    Bang-bang candidates ignore the ramp duration and appear once per tuck.
    A tuck entry of ``None`` leaves the joints unpowered in flight.
    """

    crouch_configs: tuple[tuple[float, float], ...]
    extend_configs: tuple[tuple[float, float], ...]
    ramp_durations: tuple[float, ...] = (0.1,)
    modes: tuple[str, ...] = ("pd_tracked_ramp",)
    trigger_time: float = 0.01
    tuck_configs: tuple[tuple[float, float] | None, ...] = (None,)

    def __post_init__(self):
        if not (self.crouch_configs and self.extend_configs and self.modes):
            raise InvalidSpecError("search space axes must be non-empty")
        if not self.tuck_configs:
            raise InvalidSpecError("tuck_configs must hold at least one entry (None for no tuck)")
        if "pd_tracked_ramp" in self.modes and not self.ramp_durations:
            raise InvalidSpecError("pd_tracked_ramp needs at least one ramp duration")

    def policies(self) -> list[ExtensionPolicy]:
        out = []
        for crouch, extend in itertools.product(self.crouch_configs, self.extend_configs):
            for mode in self.modes:
                ramps = self.ramp_durations if mode == "pd_tracked_ramp" else (self.ramp_durations or (0.1,))[:1]
                for ramp in ramps:
                    for tuck in self.tuck_configs:
                        out.append(ExtensionPolicy(mode, crouch, extend, self.trigger_time, ramp, tuck))
        return out

    def __len__(self) -> int:
        return len(self.policies())

    @classmethod
    def single(cls, policy: ExtensionPolicy) -> "SearchSpace":
        return cls(
            (policy.crouch_config,), (policy.extend_config,), (policy.ramp_duration,),
            (policy.mode,), policy.trigger_time, (policy.tuck_config,),
        )

    @classmethod
    def around(
        cls,
        crouch=NOMINAL_CROUCH,
        extend=NOMINAL_EXTEND,
        points: int = 5,
        crouch_span: float = math.radians(10.0),
        extend_span: float = math.radians(20.0),
        ramps: Sequence[float] = (0.04, 0.07, 0.1, 0.15, 0.2),
        modes: Sequence[str] = ("pd_tracked_ramp",),
    ) -> "SearchSpace":
        """Grid centred on a crouch/extend pair: ``points`` values per axis.

        The crouch axis moves the Head deeper/shallower together with ``mu``;
        the extend axis moves only the ``q_h`` target.
        """
        offsets = np.linspace(-1.0, 1.0, points) if points > 1 else np.zeros(1)
        crouches = tuple((crouch[0] + o * crouch_span, crouch[1] - o * crouch_span) for o in offsets)
        extends = tuple((extend[0], extend[1] + o * extend_span) for o in offsets)
        return cls(crouches, extends, tuple(ramps[:points]) if points < len(ramps) else tuple(ramps), tuple(modes))


def study_search_space() -> SearchSpace:
    """Compact search used by the design studies (8 candidates per point).

    Bang-bang and three ramp durations, each with and without a post-lift-off
    tuck back to the crouch pose.
    """
    return SearchSpace(
        crouch_configs=(NOMINAL_CROUCH,),
        extend_configs=(NOMINAL_EXTEND,),
        ramp_durations=(0.05, 0.1, 0.2),
        modes=("bang_bang", "pd_tracked_ramp"),
        tuck_configs=(None, NOMINAL_CROUCH),
    )


@dataclass(frozen=True)
class SearchOutcome:
    policy: ExtensionPolicy
    metrics: JumpMetrics
    evaluated: int
    failures: int


def optimize_extension_profile(
    m: MorphologySpec,
    cfg: SimConfig = SimConfig(),
    search_space: SearchSpace | None = None,
    objective: str = "max_h_clearance",
) -> tuple[ExtensionPolicy, JumpMetrics]:
    """Grid search over extension profiles; returns the best by ``objective``.

    The default space is :meth:`SearchSpace.around` with 5 points per axis.
    Ties go to the earliest candidate. Candidates outside the joint limits or
    without a two-wheel stance are skipped. If no candidate lifts off, the best
    grounded candidate is returned (its metrics carry ``lifted=False``).
    """
    return search_extension_profile(m, cfg, search_space, objective)[:2]


def search_extension_profile(
    m: MorphologySpec,
    cfg: SimConfig = SimConfig(),
    search_space: SearchSpace | None = None,
    objective: str = "max_h_clearance",
) -> tuple[ExtensionPolicy, JumpMetrics, SearchOutcome]:
    space = search_space or SearchSpace.around()
    best = None
    best_key = None
    failures = 0
    evaluated = 0
    for policy in space.policies():
        try:
            metrics = jump_metrics(simulate_jump(m, policy, cfg))
        except (InvalidSpecError, SimulationDivergedError):
            failures += 1
            continue
        evaluated += 1
        key = (metrics.lifted, getattr(metrics, objective))
        if best_key is None or key > best_key:
            best, best_key = (policy, metrics), key
    if best is None:
        raise NoLiftoffError("no candidate profile could be simulated")
    return best[0], best[1], SearchOutcome(best[0], best[1], evaluated, failures)


@dataclass(frozen=True)
class OracleResult:
    v_liftoff: float
    apex_gain: float
    contact_ratio: float
    stance_time: float


def point_mass_oracle(m_total: float, stance_force: float, stroke: float, g: float = 9.81) -> OracleResult:
    """Closed-form jump of a point mass pushed by a constant force over ``stroke``."""
    if not (m_total > 0 and stroke > 0 and g > 0):
        raise InvalidSpecError("mass, stroke and gravity must be positive")
    if not stance_force > m_total * g:
        raise NoLiftoffError("stance force does not exceed the weight")
    a = stance_force / m_total - g
    v = math.sqrt(2.0 * a * stroke)
    return OracleResult(v, v * v / (2.0 * g), 1.0 / (1.0 + a / g), v / a)


# Pogo reference: the Head is a point mass carrying almost all the weight and
# pushed straight up by a commanded force; Bike and Neck are nearly massless.
_POGO_LINK = 0.5
_POGO_CROUCH_HALF_ANGLE = math.radians(70.0)


def pogo_morphology(m_total: float = 23.5, massless_fraction: float = 3e-3) -> MorphologySpec:
    light = m_total * massless_fraction
    head_mass = m_total - 2 * light
    strong = ActuatorSpec(1e7, 1e4, 1.0, rotor_inertia=0.0, kp=5e3, kd=20.0)
    return MorphologySpec(
        bike=CylinderSpec(0.6, 0.0, light),
        neck=CylinderSpec(_POGO_LINK, 0.0, light),
        head=CylinderSpec(_POGO_LINK, 0.0, head_mass),
        mu=JointSpec(0.0, math.pi, (0.3, 0.0)),
        q_h=JointSpec(-math.radians(179.0), math.radians(179.0), (_POGO_LINK, 0.0)),
        mu_actuator=strong,
        q_h_actuator=strong,
        wheel_radius=0.1,
        wheelbase=0.6,
        inertia_overrides={"head": LinkInertia(head_mass, _POGO_LINK, 0.0)},
    )


POGO_SIM = SimConfig(contact_damping=10.0)


def simulate_pogo(
    m: MorphologySpec,
    stance_force: float,
    stroke: float,
    cfg: SimConfig = POGO_SIM,
    timeout: float = 3.0,
) -> JumpTrace:
    """Drive the pogo Head with a constant vertical force over ``stroke``, then lock the joints."""
    a = _POGO_CROUCH_HALF_ANGLE
    crouch = (math.pi / 2 - a, 2 * a)
    s0 = static_stance(m, crouch, cfg)
    P = model_params(m, cfg)
    T, Q, QD, TAU, FN, FT, events = K.simulate_kernel(
        P, s0.q, s0.qd, cfg.dt, timeout, K.MODE_VERTICAL_FORCE,
        np.array(crouch), np.array(crouch), 0.0, 1.0, False,
        float(stance_force), float(stroke), 2e3, 20.0, 10**7,
        np.zeros(2), False,
    )
    if events[4]:
        raise SimulationDivergedError(float(events[1]))
    return _build_trace(P, T, Q, QD, TAU, FN, FT, events, None)


@dataclass
class FlightRecord:
    time: np.ndarray
    inertia: np.ndarray  # composite pitch inertia about the CoM
    momentum: np.ndarray  # centroidal angular momentum
    energy: np.ndarray

    @property
    def pitch_rate(self) -> np.ndarray:
        """Centroidal (locked-body) pitch rate ``L / I``."""
        return self.momentum / self.inertia


def tuck_flight(
    m: MorphologySpec,
    start: tuple[float, float] = NOMINAL_EXTEND,
    tuck: tuple[float, float] = NOMINAL_CROUCH,
    spin: float = 4.0,
    tuck_at: float = 0.05,
    duration: float = 0.5,
    cfg: SimConfig = SimConfig(),
) -> FlightRecord:
    """Free flight well above the ground, spinning at ``spin`` rad/s, with a PD
    tuck toward ``tuck`` starting at ``tuck_at``."""
    s = PlanarState([0.0, 10.0 * m.wheelbase, 0.0], start, [0.0, 0.0, spin], [0.0, 0.0])
    P = model_params(m, cfg)
    n = int(round(duration / cfg.dt)) + 1
    out = np.empty((n, 4))
    for i in range(n):
        c = conserved_quantities(m, s, cfg.gravity)
        out[i] = (s.time, c["centroidal_inertia_pitch"], c["centroidal_angular_momentum"], c["mechanical_energy"])
        if i == n - 1:
            break
        tau = np.zeros(2)
        if s.time >= tuck_at:
            for j, act in enumerate((m.mu_actuator, m.q_h_actuator)):
                tau[j] = pd_torque(act, tuck[j], s.joint_pos[j], 0.0, s.joint_vel[j])
        s, _ = step(m, s, tau, cfg, P)
    return FlightRecord(*out.T.copy())
