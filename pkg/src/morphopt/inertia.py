"""Cylinder approximation of link mass properties."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidSpecError


@dataclass(frozen=True)
class CylinderSpec:
    """Solid cylinder: ``length`` and ``radius`` in m, ``mass`` in kg."""

    length: float
    radius: float
    mass: float

    def __post_init__(self):
        _check_cylinder(self)


@dataclass(frozen=True)
class LinkInertia:
    """Planar mass properties of a link.

    ``com_offset`` is measured along the link axis from the proximal joint and
    ``inertia_about_com`` is about the transverse axis through the CoM.
    """

    mass: float
    com_offset: float
    inertia_about_com: float

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass > 0):
            raise InvalidSpecError(f"link mass must be positive, got {self.mass!r}")
        if not (math.isfinite(self.inertia_about_com) and self.inertia_about_com >= 0):
            raise InvalidSpecError(
                f"inertia must be non-negative, got {self.inertia_about_com!r}"
            )
        if not math.isfinite(self.com_offset):
            raise InvalidSpecError("com_offset must be finite")


def _check_cylinder(spec: CylinderSpec) -> None:
    if not (math.isfinite(spec.length) and spec.length > 0):
        raise InvalidSpecError(f"cylinder length must be positive, got {spec.length!r}")
    if not (math.isfinite(spec.mass) and spec.mass > 0):
        raise InvalidSpecError(f"cylinder mass must be positive, got {spec.mass!r}")
    if not (math.isfinite(spec.radius) and spec.radius >= 0):
        raise InvalidSpecError(f"cylinder radius must be non-negative, got {spec.radius!r}")


def cylinder_inertia(spec: CylinderSpec) -> LinkInertia:
    """Transverse-axis inertia of a solid cylinder about its CoM.

    >>> round(cylinder_inertia(CylinderSpec(1.0, 0.0, 1.0)).inertia_about_com, 6)
    0.083333
    """
    _check_cylinder(spec)
    inertia = spec.mass * (spec.length**2 / 12.0 + spec.radius**2 / 4.0)
    return LinkInertia(spec.mass, spec.length / 2.0, inertia)


def parallel_axis_bound(spec: CylinderSpec) -> float:
    """Upper bound on the CoM inertia any mass layout inside ``spec`` can have."""
    return spec.mass * (spec.length**2 / 4.0 + spec.radius**2)
