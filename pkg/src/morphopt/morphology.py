"""Parametric description of the Bike-Neck-Head chain.

Sagittal convention: x forward, z up, angles counter-clockwise when viewed with
x to the right (positive pitch lifts the front wheel). The Neck angle ``mu`` is
measured from the Bike axis, the Head angle ``q_h`` from the Neck axis.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping

from .actuators import AK10_9_ALPHA, AK10_9_BETA_PAIR, ActuatorSpec
from .errors import InvalidSpecError
from .inertia import CylinderSpec, LinkInertia, cylinder_inertia

LINK_NAMES = ("bike", "neck", "head")


@dataclass(frozen=True)
class JointSpec:
    """Revolute joint with position limits (rad) and a mounting offset (m).

    For ``mu`` the offset is the pivot location in the Bike frame relative to the
    rear axle; for ``q_h`` it is the pivot in the Neck frame relative to ``mu``.
    """

    lower: float
    upper: float
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidSpecError(f"joint limits need lower < upper, got {self.lower}, {self.upper}")
        object.__setattr__(self, "offset", (float(self.offset[0]), float(self.offset[1])))

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


@dataclass(frozen=True)
class MorphologySpec:
    bike: CylinderSpec
    neck: CylinderSpec
    head: CylinderSpec
    mu: JointSpec
    q_h: JointSpec
    mu_actuator: ActuatorSpec
    q_h_actuator: ActuatorSpec
    wheel_radius: float
    wheelbase: float
    scale: float = 1.0
    # explicit mass properties that bypass the cylinder model (reference models)
    inertia_overrides: Mapping[str, LinkInertia] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidSpecError(f"scale must be positive, got {self.scale!r}")
        if not (self.wheel_radius > 0 and self.wheelbase > 0):
            raise InvalidSpecError("wheel_radius and wheelbase must be positive")
        unknown = set(self.inertia_overrides) - set(LINK_NAMES)
        if unknown:
            raise InvalidSpecError(f"unknown link override(s): {sorted(unknown)}")

    @property
    def links(self) -> tuple[CylinderSpec, CylinderSpec, CylinderSpec]:
        return (self.bike, self.neck, self.head)

    @property
    def actuators(self) -> dict[str, ActuatorSpec]:
        return {"mu": self.mu_actuator, "q_h": self.q_h_actuator}

    @property
    def total_mass(self) -> float:
        return sum(self.link_inertia(name).mass for name in LINK_NAMES)

    def link_inertia(self, name: str) -> LinkInertia:
        if name in self.inertia_overrides:
            return self.inertia_overrides[name]
        return cylinder_inertia(getattr(self, name))

    def with_link_mass(self, name: str, mass: float) -> "MorphologySpec":
        """Same geometry, different mass for one link."""
        cyl = getattr(self, name)
        return replace(self, **{name: replace(cyl, mass=float(mass))})

    def with_actuator(self, joint: str, act: ActuatorSpec) -> "MorphologySpec":
        if joint not in ("mu", "q_h"):
            raise InvalidSpecError(f"unknown joint {joint!r}")
        return replace(self, **{f"{joint}_actuator": act})

    def to_dict(self) -> dict[str, Any]:
        out = {
            "links": {name: asdict(getattr(self, name)) for name in LINK_NAMES},
            "joints": {
                j: {"lower": js.lower, "upper": js.upper, "offset": list(js.offset)}
                for j, js in (("mu", self.mu), ("q_h", self.q_h))
            },
            "actuators": {j: asdict(a) for j, a in self.actuators.items()},
            "wheel_radius": self.wheel_radius,
            "wheelbase": self.wheelbase,
            "scale": self.scale,
        }
        if self.inertia_overrides:
            out["inertia_overrides"] = {k: asdict(v) for k, v in self.inertia_overrides.items()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MorphologySpec":
        links = data["links"]
        joints = data["joints"]
        acts = data["actuators"]
        overrides = {k: LinkInertia(**v) for k, v in data.get("inertia_overrides", {}).items()}
        return cls(
            bike=CylinderSpec(**links["bike"]),
            neck=CylinderSpec(**links["neck"]),
            head=CylinderSpec(**links["head"]),
            mu=JointSpec(joints["mu"]["lower"], joints["mu"]["upper"], tuple(joints["mu"]["offset"])),
            q_h=JointSpec(joints["q_h"]["lower"], joints["q_h"]["upper"], tuple(joints["q_h"]["offset"])),
            mu_actuator=ActuatorSpec(**acts["mu"]),
            q_h_actuator=ActuatorSpec(**acts["q_h"]),
            wheel_radius=float(data["wheel_radius"]),
            wheelbase=float(data["wheelbase"]),
            scale=float(data.get("scale", 1.0)),
            inertia_overrides=overrides,
        )


def build_morphology(base: MorphologySpec, scale: float) -> MorphologySpec:
    """Scale every length of ``base`` by ``scale``.

    Link radii and material densities stay fixed, so link masses grow in
    proportion to length. Actuators are off-the-shelf and do not scale. The
    returned spec's ``scale`` is ``base.scale * scale``.
    """
    if not (math.isfinite(scale) and scale > 0):
        raise InvalidSpecError(f"scale must be positive, got {scale!r}")
    if scale == 1.0:
        return base

    def cyl(c: CylinderSpec) -> CylinderSpec:
        return CylinderSpec(c.length * scale, c.radius, c.mass * scale)

    def joint(j: JointSpec) -> JointSpec:
        return JointSpec(j.lower, j.upper, (j.offset[0] * scale, j.offset[1] * scale))

    overrides = {
        k: LinkInertia(v.mass * scale, v.com_offset * scale, v.inertia_about_com * scale**3)
        for k, v in base.inertia_overrides.items()
    }
    return replace(
        base,
        bike=cyl(base.bike),
        neck=cyl(base.neck),
        head=cyl(base.head),
        mu=joint(base.mu),
        q_h=joint(base.q_h),
        wheel_radius=base.wheel_radius * scale,
        wheelbase=base.wheelbase * scale,
        scale=base.scale * scale,
        inertia_overrides=overrides,
    )


NOMINAL_SCALE = 0.4

# Geometry at scale 1.0 (Neck length 1 m). Masses follow the fixed-density
# cylinder law so that the nominal build weighs 23.5 kg.
UNIT_TEMPLATE = MorphologySpec(
    bike=CylinderSpec(1.5, 0.04, 17.5),
    neck=CylinderSpec(1.0, 0.04, 6.25),
    head=CylinderSpec(1.025, 0.12, 35.0),
    mu=JointSpec(math.radians(10.0), math.radians(178.0), (0.95, 0.6)),
    q_h=JointSpec(math.radians(-175.0), math.radians(90.0), (1.0, 0.0)),
    mu_actuator=replace(AK10_9_ALPHA, count=2, kp=400.0, kd=8.0),
    q_h_actuator=replace(AK10_9_BETA_PAIR, kp=400.0, kd=8.0),
    wheel_radius=0.375,
    wheelbase=1.5,
    scale=1.0,
)

# joint targets (mu, q_h) of the nominal jump, in radians
NOMINAL_CROUCH = (math.radians(155.0), math.radians(-141.0))
NOMINAL_EXTEND = (math.radians(99.0), math.radians(-35.0))


def nominal_morphology() -> MorphologySpec:
    """The 23.5 kg desk-scale robot with a 0.4 m Neck."""
    return build_morphology(UNIT_TEMPLATE, NOMINAL_SCALE)
