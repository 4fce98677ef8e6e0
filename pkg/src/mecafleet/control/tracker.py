"""Feedback trajectory tracking: u = -K (x - x_ref) around a moving reference.

The per-axis gain comes from the double-integrator DARE. Each control
period the feedback acceleration u is integrated into a persistent
velocity correction (one u * dt increment per step), and the wheel layer
is commanded v_ref plus that correction: reference-velocity feedforward
with LQR-shaped error dynamics. At zero tracking error with no
accumulated correction the command reduces exactly to the reference
velocity. Heading runs its own independent (theta, omega) regulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..estimator import RobotState, wrap_angle
from ..kinematics import BodyTwist, ChassisGeometry, DEFAULT_GEOMETRY, saturate_twist
from .dare import PlantModel, discretize, solve_dare
from .references import ReferencePoint


@dataclass(frozen=True, slots=True)
class LqrWeights:
    """Diagonal state/input costs for the translational and yaw regulators."""

    q_pos: float = 10.0
    q_vel: float = 2.0
    r_accel: float = 1.0
    q_theta: float = 10.0
    q_omega: float = 2.0
    r_yaw: float = 1.0

    def __post_init__(self) -> None:
        if min(self.q_pos, self.q_vel, self.q_theta, self.q_omega) < 0:
            raise ValueError("state weights must be nonnegative")
        if min(self.r_accel, self.r_yaw) <= 0:
            raise ValueError("input weights must be positive")


@lru_cache(maxsize=64)
def _synthesise_gains(weights: LqrWeights, dt: float) -> tuple[tuple[float, float], tuple[float, float]]:
    ad, bd = discretize(PlantModel(dt=dt))
    _, k_axis = solve_dare(
        ad, bd, np.diag([weights.q_pos, weights.q_vel]), np.array([[weights.r_accel]])
    )
    _, k_yaw = solve_dare(
        ad, bd, np.diag([weights.q_theta, weights.q_omega]), np.array([[weights.r_yaw]])
    )
    return tuple(k_axis[0]), tuple(k_yaw[0])


class TrackingController:
    """One tracker instance per robot; holds the accumulated correction."""

    # correction bound, m/s: anti-windup when the plant saturates
    CORRECTION_LIMIT = 2.0

    def __init__(
        self,
        weights: LqrWeights | None = None,
        geometry: ChassisGeometry = DEFAULT_GEOMETRY,
        dt: float = 0.02,
    ):
        self.weights = weights or LqrWeights()
        self.geometry = geometry
        self.dt = dt
        k_axis, k_yaw = _synthesise_gains(self.weights, dt)
        self.k_axis = np.array(k_axis)  # (2,), shared by both translation axes
        self.k_yaw = np.array(k_yaw)
        self.v_corr = np.zeros(2)       # world frame, m/s
        self.omega_corr = 0.0

    def reset(self) -> None:
        """Clear accumulated corrections (call when a new reference starts)."""
        self.v_corr = np.zeros(2)
        self.omega_corr = 0.0

    def control_step(self, state: RobotState, ref: ReferencePoint) -> BodyTwist:
        """One feedback step: world-frame command rotated into the body frame."""
        if not (np.all(np.isfinite(state.p)) and np.all(np.isfinite(state.v))):
            raise ValueError("non-finite state")

        err = np.array(
            [
                state.p[0] - ref.p_ref[0],
                state.v[0] - ref.v_ref[0],
                state.p[1] - ref.p_ref[1],
                state.v[1] - ref.v_ref[1],
            ]
        )
        accel = np.array(
            [
                -float(self.k_axis @ err[0:2]),
                -float(self.k_axis @ err[2:4]),
            ]
        )
        self.v_corr = self.v_corr + accel * self.dt
        corr_norm = float(np.linalg.norm(self.v_corr))
        if corr_norm > self.CORRECTION_LIMIT:
            self.v_corr *= self.CORRECTION_LIMIT / corr_norm
        v_world = ref.v_ref + self.v_corr

        yaw_err = np.array([wrap_angle(state.theta - ref.theta_ref), state.omega])
        self.omega_corr += -float(self.k_yaw @ yaw_err) * self.dt
        self.omega_corr = max(-self.CORRECTION_LIMIT, min(self.CORRECTION_LIMIT, self.omega_corr))

        cos_t, sin_t = math.cos(state.theta), math.sin(state.theta)
        body = BodyTwist(
            vx=cos_t * v_world[0] + sin_t * v_world[1],
            vy=-sin_t * v_world[0] + cos_t * v_world[1],
            omega=self.omega_corr,
        )
        return saturate_twist(body, self.geometry)
