"""Mecanum four-wheel kinematics with the platform's physical limits.

Wheel convention: fl, fr, rl, rr, all with 45-degree rollers. The mixing
matrix maps a chassis-frame twist (vx forward, vy left, omega CCW) to
wheel angular speeds; saturation scales all four wheels (or the whole
twist) uniformly so the commanded motion direction is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_WHEEL_RPM = 1000.0
RPM_PER_RAD_S = 60.0 / (2.0 * math.pi)


@dataclass(frozen=True, slots=True)
class BodyTwist:
    """Chassis-frame velocity command: forward m/s, left m/s, CCW rad/s."""

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.vx, self.vy, self.omega)):
            raise ValueError(f"non-finite twist: {self}")

    def scaled(self, factor: float) -> "BodyTwist":
        return BodyTwist(self.vx * factor, self.vy * factor, self.omega * factor)


@dataclass(frozen=True, slots=True)
class WheelSpeeds:
    """Signed wheel speeds in RPM: front-left, front-right, rear-left, rear-right."""

    fl: float = 0.0
    fr: float = 0.0
    rl: float = 0.0
    rr: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self):
            raise ValueError(f"non-finite wheel speeds: {self}")

    def __iter__(self):
        yield self.fl
        yield self.fr
        yield self.rl
        yield self.rr

    @property
    def max_abs(self) -> float:
        return max(abs(v) for v in self)


@dataclass(frozen=True, slots=True)
class ChassisGeometry:
    """Wheel radius and half axle spacings in metres; yaw rate cap in rad/s.

    Defaults: 100 mm wheels, square 0.2 m wheelbase/track, 600 deg/s yaw.
    """

    wheel_radius: float = 0.05
    half_length: float = 0.10
    half_width: float = 0.10
    omega_max: float = math.radians(600.0)

    def __post_init__(self) -> None:
        for name in ("wheel_radius", "half_length", "half_width", "omega_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def mix(self) -> float:
        """Lever arm a+b coupling yaw rate into wheel surface speed."""
        return self.half_length + self.half_width

    @property
    def max_speed(self) -> float:
        """Straight-line speed at the wheel RPM limit, m/s."""
        return MAX_WHEEL_RPM / RPM_PER_RAD_S * self.wheel_radius


DEFAULT_GEOMETRY = ChassisGeometry()


def inverse_kinematics(t: BodyTwist, g: ChassisGeometry = DEFAULT_GEOMETRY) -> WheelSpeeds:
    """Wheel speeds realising a body twist, uniformly saturated to 1000 RPM."""
    k = g.mix
    r = g.wheel_radius
    raw = WheelSpeeds(
        fl=(t.vx - t.vy - k * t.omega) / r * RPM_PER_RAD_S,
        fr=(t.vx + t.vy + k * t.omega) / r * RPM_PER_RAD_S,
        rl=(t.vx + t.vy - k * t.omega) / r * RPM_PER_RAD_S,
        rr=(t.vx - t.vy + k * t.omega) / r * RPM_PER_RAD_S,
    )
    return saturate_wheel_speeds(raw)


def forward_kinematics(w: WheelSpeeds, g: ChassisGeometry = DEFAULT_GEOMETRY) -> BodyTwist:
    """Least-squares body twist for the given wheel speeds (pseudo-inverse)."""
    r = g.wheel_radius
    fl, fr, rl, rr = (v / RPM_PER_RAD_S for v in w)
    return BodyTwist(
        vx=r * (fl + fr + rl + rr) / 4.0,
        vy=r * (-fl + fr + rl - rr) / 4.0,
        omega=r * (-fl + fr - rl + rr) / (4.0 * g.mix),
    )


def saturate_wheel_speeds(w: WheelSpeeds, limit: float = MAX_WHEEL_RPM) -> WheelSpeeds:
    """Scale all four wheels by a common factor so the fastest hits the limit."""
    peak = w.max_abs
    if peak <= limit:
        return w
    factor = limit / peak
    return WheelSpeeds(w.fl * factor, w.fr * factor, w.rl * factor, w.rr * factor)


def saturate_twist(t: BodyTwist, g: ChassisGeometry = DEFAULT_GEOMETRY) -> BodyTwist:
    """Uniformly scale a twist until its wheel speeds and yaw rate are feasible.

    Scaling (rather than per-wheel clamping) keeps the output a positive
    multiple of the input, so the commanded direction of motion survives.
    """
    k = g.mix
    r = g.wheel_radius
    peak_rpm = max(
        abs(t.vx - t.vy - k * t.omega),
        abs(t.vx + t.vy + k * t.omega),
        abs(t.vx + t.vy - k * t.omega),
        abs(t.vx - t.vy + k * t.omega),
    ) / r * RPM_PER_RAD_S
    factor = 1.0
    if peak_rpm > MAX_WHEEL_RPM:
        factor = MAX_WHEEL_RPM / peak_rpm
    if abs(t.omega) * factor > g.omega_max:
        factor = g.omega_max / abs(t.omega)
    if factor >= 1.0:
        return t
    return t.scaled(factor)
