"""Actuator envelopes and the joint-level PD law."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidSpecError

# Not published for the AK10-9 class; placeholder per motor.
DEFAULT_ROTOR_INERTIA = 1e-4


@dataclass(frozen=True)
class ActuatorSpec:
    """Output-side limits of one actuator unit (or a coupled pair when ``count == 2``).

    ``max_output_torque`` is per unit; a coupled pair doubles the torque and the
    reflected rotor inertia but shares the speed limit.
    """

    max_output_torque: float
    max_output_speed: float
    gear_ratio: float
    rotor_inertia: float = DEFAULT_ROTOR_INERTIA
    kp: float = 0.0
    kd: float = 0.0
    count: int = 1
    name: str = ""

    def __post_init__(self):
        # zero torque is allowed so limiting cases (dead actuator) stay expressible
        if not (math.isfinite(self.max_output_torque) and self.max_output_torque >= 0):
            raise InvalidSpecError(f"max_output_torque must be >= 0, got {self.max_output_torque!r}")
        if not (math.isfinite(self.max_output_speed) and self.max_output_speed > 0):
            raise InvalidSpecError(f"max_output_speed must be > 0, got {self.max_output_speed!r}")
        if not (math.isfinite(self.gear_ratio) and self.gear_ratio > 0):
            raise InvalidSpecError(f"gear_ratio must be > 0, got {self.gear_ratio!r}")
        if self.count not in (1, 2):
            raise InvalidSpecError(f"count must be 1 or 2, got {self.count!r}")
        if self.rotor_inertia < 0 or self.kp < 0 or self.kd < 0:
            raise InvalidSpecError("rotor_inertia, kp and kd must be non-negative")

    @property
    def total_torque(self) -> float:
        return self.count * self.max_output_torque

    @property
    def motor_torque(self) -> float:
        """Per-unit torque at the motor shaft."""
        return self.max_output_torque / self.gear_ratio

    @property
    def motor_speed(self) -> float:
        return self.max_output_speed * self.gear_ratio

    @property
    def reflected_inertia(self) -> float:
        return self.count * self.rotor_inertia * self.gear_ratio**2

    def with_gear_ratio(self, gear_ratio: float) -> "ActuatorSpec":
        """Same motor behind a different transmission: torque ~ GR, speed ~ 1/GR."""
        if not gear_ratio > 0:
            raise InvalidSpecError(f"gear_ratio must be > 0, got {gear_ratio!r}")
        return replace(
            self,
            max_output_torque=self.motor_torque * gear_ratio,
            max_output_speed=self.motor_speed / gear_ratio,
            gear_ratio=float(gear_ratio),
        )

    def with_count(self, count: int) -> "ActuatorSpec":
        return replace(self, count=count)


def torque_available(act: ActuatorSpec, joint_velocity: float) -> float:
    """Magnitude bound on output torque at ``joint_velocity`` (linear derating)."""
    derate = max(0.0, 1.0 - abs(joint_velocity) / act.max_output_speed)
    return act.count * act.max_output_torque * derate


def pd_torque(act: ActuatorSpec, q_des: float, q: float, qd_des: float, qd: float) -> float:
    raw = act.kp * (q_des - q) + act.kd * (qd_des - qd)
    limit = torque_available(act, qd)
    return min(max(raw, -limit), limit)


# Catalog rows of the robot's actuators. Output torque is per unit.
AK10_9_ALPHA = ActuatorSpec(72.0, 29.4, 297 / 22, name="A0/A1 AK10-9")
AK10_9_BETA_PAIR = ActuatorSpec(109.0, 19.4, 450 / 22, count=2, name="A2+A3 AK10-9")
R80_WHEEL = ActuatorSpec(26.0, 74.0, 13 / 2, name="A4 R80")
R60_STEER = ActuatorSpec(6.25, 160.0, 38 / 14, name="A5 R60")
