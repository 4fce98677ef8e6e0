"""Plant discretisation and a fixed-point discrete Riccati solver.

The plant is a per-axis double integrator (position, velocity). Matrices
this small don't justify a structured solver; the Riccati recursion is
iterated to a tight fixed point and the result is verified by its
residual and the closed-loop spectral radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DOUBLE_INTEGRATOR_A = np.array([[0.0, 1.0], [0.0, 0.0]])
DOUBLE_INTEGRATOR_B = np.array([[0.0], [1.0]])


class DareError(RuntimeError):
    """Riccati iteration failed to converge or inputs were invalid."""


@dataclass(frozen=True)
class PlantModel:
    """Continuous-time model dx/dt = A x + B u plus the control period."""

    A: np.ndarray = field(default_factory=lambda: DOUBLE_INTEGRATOR_A.copy())
    B: np.ndarray = field(default_factory=lambda: DOUBLE_INTEGRATOR_B.copy())
    dt: float = 0.02

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def discretize(plant: PlantModel) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretisation for nilpotent A (A @ A = 0).

    For the double integrator this is Ad = [[1, dt], [0, 1]],
    Bd = [[dt^2/2], [dt]].
    """
    a, b, dt = plant.A, plant.B, plant.dt
    if np.any(a @ a != 0.0):
        raise ValueError("exact ZOH here requires a nilpotent A (A @ A = 0)")
    n = a.shape[0]
    ad = np.eye(n) + a * dt
    bd = (np.eye(n) * dt + a * (dt * dt / 2.0)) @ b
    return ad, bd


def solve_dare(
    ad: np.ndarray,
    bd: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the discrete algebraic Riccati equation by fixed-point iteration.

    Returns (P, K) with K = (R + Bd' P Bd)^-1 Bd' P Ad. Raises DareError
    if the iteration does not converge, inputs are indefinite, or the
    closed loop Ad - Bd K is not a strict contraction.
    """
    ad = np.atleast_2d(np.asarray(ad, dtype=float))
    bd = np.atleast_2d(np.asarray(bd, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r = np.atleast_2d(np.asarray(r, dtype=float))

    if np.any(np.linalg.eigvalsh((q + q.T) / 2.0) < -1e-12):
        raise DareError("Q must be positive semidefinite")
    if np.any(np.linalg.eigvalsh((r + r.T) / 2.0) <= 0.0):
        raise DareError("R must be positive definite")

    p = q.copy()
    for _ in range(max_iter):
        btp = bd.T @ p
        gain = np.linalg.solve(r + btp @ bd, btp @ ad)
        p_next = q + ad.T @ p @ (ad - bd @ gain)
        p_next = (p_next + p_next.T) / 2.0
        delta = np.max(np.abs(p_next - p))
        p = p_next
        if delta < tol:
            break
    else:
        raise DareError(f"no convergence after {max_iter} iterations (delta={delta:.3e})")

    k = np.linalg.solve(r + bd.T @ p @ bd, bd.T @ p @ ad)
    closed_loop = ad - bd @ k
    rho = np.max(np.abs(np.linalg.eigvals(closed_loop)))
    if rho >= 1.0:
        raise DareError(f"closed loop not stable: spectral radius {rho:.6f}")
    return p, k


def dare_residual(
    ad: np.ndarray, bd: np.ndarray, q: np.ndarray, r: np.ndarray, p: np.ndarray
) -> float:
    """Max-abs residual of the Riccati equation at P."""
    btp = bd.T @ p
    correction = ad.T @ p @ bd @ np.linalg.solve(r + btp @ bd, btp @ ad)
    return float(np.max(np.abs(ad.T @ p @ ad - correction + q - p)))
