"""Reference trajectory generators: straight line, circle, waypoint chain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, slots=True)
class ReferencePoint:
    p_ref: np.ndarray      # (2,) m
    v_ref: np.ndarray      # (2,) m/s
    theta_ref: float
    t: float


def trapezoid_profile(length: float, a_max: float, v_max: float) -> tuple[float, float, float]:
    """(peak velocity, accel time, cruise time) for a rest-to-rest segment.

    Degenerates to a triangular profile when the segment is too short to
    reach v_max.
    """
    if min(length, a_max, v_max) <= 0:
        raise ValueError("length, a_max, and v_max must be positive")
    v_peak = min(v_max, math.sqrt(a_max * length))
    t_accel = v_peak / a_max
    cruise_dist = length - v_peak * t_accel  # length - 2 * (v_peak^2 / 2a)
    t_cruise = max(0.0, cruise_dist / v_peak)
    return v_peak, t_accel, t_cruise


def _profile_sample(length: float, a_max: float, v_peak: float, t_accel: float,
                    t_cruise: float, t: float) -> tuple[float, float]:
    """(distance along segment, speed) at time t."""
    if t <= 0.0:
        return 0.0, 0.0
    if t < t_accel:
        return 0.5 * a_max * t * t, a_max * t
    d_accel = 0.5 * a_max * t_accel * t_accel
    if t < t_accel + t_cruise:
        return d_accel + v_peak * (t - t_accel), v_peak
    t_dec = t - t_accel - t_cruise
    if t_dec < t_accel:
        return (
            d_accel + v_peak * t_cruise + v_peak * t_dec - 0.5 * a_max * t_dec * t_dec,
            v_peak - a_max * t_dec,
        )
    return length, 0.0


def line_reference(
    length: float,
    a_max: float,
    v_max: float,
    t: float,
    origin: tuple[float, float] = (0.0, 0.0),
    direction: float = 0.0,
    theta_ref: float = 0.0,
) -> ReferencePoint:
    """Rest-to-rest trapezoidal run along a straight segment.

    ``direction`` is the world-frame bearing of the segment; heading is
    commanded separately (a holonomic platform need not face its motion).
    """
    v_peak, t_accel, t_cruise = trapezoid_profile(length, a_max, v_max)
    dist, speed = _profile_sample(length, a_max, v_peak, t_accel, t_cruise, t)
    u = np.array([math.cos(direction), math.sin(direction)])
    return ReferencePoint(
        p_ref=np.asarray(origin, dtype=float) + u * dist,
        v_ref=u * speed,
        theta_ref=theta_ref,
        t=t,
    )


def line_duration(length: float, a_max: float, v_max: float) -> float:
    _, t_accel, t_cruise = trapezoid_profile(length, a_max, v_max)
    return 2.0 * t_accel + t_cruise


def circle_reference(
    diameter: float,
    speed: float,
    t: float,
    center: tuple[float, float] = (0.0, 0.0),
    theta_ref: float = 0.0,
) -> ReferencePoint:
    """Constant-speed counter-clockwise circle, starting at the +x point."""
    if min(diameter, speed) <= 0:
        raise ValueError("diameter and speed must be positive")
    radius = diameter / 2.0
    rate = speed / radius
    phase = rate * t
    c = np.asarray(center, dtype=float)
    return ReferencePoint(
        p_ref=c + radius * np.array([math.cos(phase), math.sin(phase)]),
        v_ref=speed * np.array([-math.sin(phase), math.cos(phase)]),
        theta_ref=theta_ref,
        t=t,
    )


def waypoint_reference(
    waypoints: list[tuple[float, float]],
    a_max: float,
    v_max: float,
    t: float,
    theta_ref: float = 0.0,
) -> ReferencePoint:
    """Chain of rest-to-rest line segments through the waypoint list."""
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    elapsed = 0.0
    for start, end in zip(waypoints, waypoints[1:]):
        seg = np.asarray(end, dtype=float) - np.asarray(start, dtype=float)
        length = float(np.linalg.norm(seg))
        if length <= 1e-12:
            continue
        duration = line_duration(length, a_max, v_max)
        if t <= elapsed + duration:
            return line_reference(
                length, a_max, v_max, t - elapsed,
                origin=start, direction=math.atan2(seg[1], seg[0]), theta_ref=theta_ref,
            )
        elapsed += duration
    final = np.asarray(waypoints[-1], dtype=float)
    return ReferencePoint(p_ref=final, v_ref=np.zeros(2), theta_ref=theta_ref, t=t)
