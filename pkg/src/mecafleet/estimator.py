"""Constant-velocity Kalman filter producing the state the controller consumes.

State vector: [px, py, vx, vy, theta, omega]. Position/velocity follow a
white-noise-acceleration model per axis; heading is an independent
(theta, omega) double integrator with wrapped innovations. Observations
are planar pose fixes (x, y, theta) from motion capture, the simulator,
or an external source.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


class ObservationSource(Enum):
    MOCAP = "mocap"
    SIM = "sim"
    EXTERNAL = "external"


@dataclass(frozen=True, slots=True)
class RobotState:
    """Planar world-frame state at time t."""

    p: np.ndarray          # position, m (2,)
    v: np.ndarray          # velocity, m/s (2,)
    theta: float           # heading, rad, wrapped to (-pi, pi]
    omega: float           # yaw rate, rad/s
    t: float

    @staticmethod
    def at_rest(x: float = 0.0, y: float = 0.0, theta: float = 0.0, t: float = 0.0) -> "RobotState":
        return RobotState(np.array([x, y]), np.zeros(2), wrap_angle(theta), 0.0, t)


@dataclass(frozen=True, slots=True)
class PoseObservation:
    p_meas: np.ndarray     # (2,)
    theta_meas: float
    t: float
    source: ObservationSource = ObservationSource.MOCAP


@dataclass(frozen=True, slots=True)
class FilterConfig:
    """Noise densities and the innovation gate.

    q is the white-noise acceleration spectral density shared by the
    translational and heading channels; r_p / r_theta are measurement
    variances; gate is the chi-square bound (2 dof) on the position
    innovation's Mahalanobis distance.
    """

    q: float = 1.0
    r_p: float = 1e-6
    r_theta: float = 1e-6
    gate: float = 9.21

    def __post_init__(self) -> None:
        if min(self.q, self.r_p, self.r_theta, self.gate) <= 0:
            raise ValueError("filter parameters must be positive")


class InsufficientHistoryError(ValueError):
    """Velocity queried before the filter has seen enough updates."""


def _transition(dt: float) -> np.ndarray:
    f = np.eye(6)
    f[0, 2] = dt
    f[1, 3] = dt
    f[4, 5] = dt
    return f


def _process_noise(dt: float, q: float) -> np.ndarray:
    # exact integral of white-noise acceleration over dt, per 2nd-order block
    q11 = q * dt**3 / 3.0
    q12 = q * dt**2 / 2.0
    q22 = q * dt
    qm = np.zeros((6, 6))
    for pos, vel in ((0, 2), (1, 3), (4, 5)):
        qm[pos, pos] = q11
        qm[pos, vel] = qm[vel, pos] = q12
        qm[vel, vel] = q22
    return qm


# observation picks px, py, theta
_H = np.zeros((3, 6))
_H[0, 0] = _H[1, 1] = _H[2, 4] = 1.0


class KalmanEstimator:
    """Single-robot pose/velocity filter. One instance per robot, single writer."""

    def __init__(self, config: FilterConfig | None = None):
        self.config = config or FilterConfig()
        self.x = np.zeros(6)
        self.P = np.diag([1.0, 1.0, 4.0, 4.0, 1.0, 4.0])
        self.t = 0.0
        self.initialized = False
        self.updates_applied = 0
        self.rejected_count = 0

    def initialize(self, obs: PoseObservation) -> None:
        self.x = np.zeros(6)
        self.x[0:2] = obs.p_meas
        self.x[4] = wrap_angle(obs.theta_meas)
        self.P = np.diag([self.config.r_p, self.config.r_p, 4.0, 4.0, self.config.r_theta, 4.0])
        self.t = obs.t
        self.initialized = True
        self.updates_applied = 1

    def predict(self, dt: float) -> None:
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        f = _transition(dt)
        self.x = f @ self.x
        self.x[4] = wrap_angle(self.x[4])
        self.P = f @ self.P @ f.T + _process_noise(dt, self.config.q)
        self.t += dt

    def update(self, obs: PoseObservation) -> bool:
        """Fuse one pose fix; returns False if the gate rejected it.

        Predicts forward to obs.t first. Observations older than the
        filter time are a caller bug and raise.
        """
        if not self.initialized:
            self.initialize(obs)
            return True
        if obs.t < self.t - 1e-12:
            raise ValueError(f"out-of-order observation: {obs.t} < {self.t}")
        if obs.t > self.t:
            self.predict(obs.t - self.t)
            self.t = obs.t

        innovation = np.array(
            [
                obs.p_meas[0] - self.x[0],
                obs.p_meas[1] - self.x[1],
                wrap_angle(obs.theta_meas - self.x[4]),
            ]
        )
        r = np.diag([self.config.r_p, self.config.r_p, self.config.r_theta])
        s = _H @ self.P @ _H.T + r

        # gate on the position components (2 dof)
        s_pos = s[:2, :2]
        d2 = float(innovation[:2] @ np.linalg.solve(s_pos, innovation[:2]))
        if d2 > self.config.gate:
            self.rejected_count += 1
            return False

        k = self.P @ _H.T @ np.linalg.inv(s)
        self.x = self.x + k @ innovation
        self.x[4] = wrap_angle(self.x[4])
        # Joseph form keeps P symmetric positive definite under roundoff
        a = np.eye(6) - k @ _H
        self.P = a @ self.P @ a.T + k @ r @ k.T
        self.updates_applied += 1
        return True

    @property
    def state(self) -> RobotState:
        return RobotState(
            p=self.x[0:2].copy(),
            v=self.x[2:4].copy(),
            theta=float(self.x[4]),
            omega=float(self.x[5]),
            t=self.t,
        )

    @property
    def velocity(self) -> np.ndarray:
        """Filter-consistent velocity estimate; needs at least two fixes."""
        if self.updates_applied < 2:
            raise InsufficientHistoryError(
                f"{self.updates_applied} update(s) applied, need at least 2"
            )
        return self.x[2:4].copy()


def velocity_from_track(history: Sequence[RobotState]) -> np.ndarray:
    """Velocity from a filtered track: the filter's own estimate at the tail."""
    if len(history) < 2:
        raise InsufficientHistoryError(f"need at least 2 states, got {len(history)}")
    return np.asarray(history[-1].v, dtype=float).copy()


def read_observation_csv(path: str | Path, source: ObservationSource = ObservationSource.EXTERNAL) -> list[PoseObservation]:
    """Load (t, x, y, theta) rows for replaying a recorded track."""
    observations = []
    last_t = -math.inf
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            if t < last_t:
                raise ValueError(f"timestamps must be non-decreasing, got {t} after {last_t}")
            last_t = t
            observations.append(
                PoseObservation(
                    p_meas=np.array([float(row["x"]), float(row["y"])]),
                    theta_meas=float(row["theta"]),
                    t=t,
                    source=source,
                )
            )
    return observations
