"""Scenario construction and the scripted goal-seeking policy.

``swap_8`` mirrors the eight-agent position-swap evaluation: two rows of
four agents facing each other across a 4 x 2 m rectangle, every goal the
reflection of its start across the long-axis midline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import PhysicsParams, PidGains, WorldBatch

SCENARIO_NAMES = ("line_track", "circle_track", "swap_8", "custom")

SWAP_RECT_LENGTH = 4.0
SWAP_RECT_WIDTH = 2.0


@dataclass(frozen=True)
class SwapPolicyParams:
    """Gains for the attract/repulse velocity policy."""

    v_cap: float = 1.1
    goal_gain: float = 1.4
    sense_radius: float = 1.2
    repulse_gain: float = 0.6
    bias_gain: float = 0.45      # right-hand bias, breaks head-on symmetry
    goal_tolerance: float = 0.03


def make_scenario(
    name: str,
    n_envs: int = 1,
    params: PhysicsParams | None = None,
    gains: PidGains | None = None,
    dt: float = 0.01,
    n_agents: int | None = None,
    starts: np.ndarray | None = None,
    goals: np.ndarray | None = None,
) -> tuple[WorldBatch, np.ndarray | None]:
    """Initial world and per-agent goals (None for trajectory scenarios)."""
    if name not in SCENARIO_NAMES:
        raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")

    if name == "line_track":
        world = WorldBatch.create(n_envs, 1, dt=dt, params=params, gains=gains)
        return world, None

    if name == "circle_track":
        world = WorldBatch.create(n_envs, 1, dt=dt, params=params, gains=gains)
        world.pos[:, 0] = [0.75, 0.0]  # start on the circle
        return world, None

    if name == "swap_8":
        xs = np.array([-1.5, -0.5, 0.5, 1.5])
        top = np.stack([xs, np.full(4, SWAP_RECT_WIDTH / 2.0)], axis=1)
        bottom = np.stack([xs, np.full(4, -SWAP_RECT_WIDTH / 2.0)], axis=1)
        start = np.concatenate([top, bottom], axis=0)            # (8, 2)
        goal = start * np.array([1.0, -1.0])                     # reflect across midline
        world = WorldBatch.create(n_envs, 8, dt=dt, params=params, gains=gains)
        world.pos[:] = start
        return world, np.broadcast_to(goal, (n_envs, 8, 2)).copy()

    # custom
    if starts is None or (n_agents or len(starts)) == 0:
        raise ValueError("custom scenario needs at least one agent start position")
    starts = np.asarray(starts, dtype=float)
    world = WorldBatch.create(n_envs, len(starts), dt=dt, params=params, gains=gains)
    world.pos[:] = starts
    goal_arr = None
    if goals is not None:
        goal_arr = np.broadcast_to(np.asarray(goals, dtype=float), world.pos.shape).copy()
    return world, goal_arr


def scripted_swap_policy(
    world: WorldBatch,
    goals: np.ndarray,
    policy: SwapPolicyParams | None = None,
) -> np.ndarray:
    """Velocity commands: capped goal attraction plus biased neighbour repulsion.

    Deterministic in the world state. The repulsion's clockwise bias makes
    two symmetric head-on agents sidestep to their respective right
    instead of deadlocking.
    """
    p = policy or SwapPolicyParams()
    pos = world.pos                                   # (E, A, 2)
    to_goal = goals - pos
    dist_goal = np.linalg.norm(to_goal, axis=-1, keepdims=True)
    v_cmd = p.goal_gain * to_goal
    speed = np.linalg.norm(v_cmd, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        v_cmd = np.where(speed > p.v_cap, v_cmd * (p.v_cap / np.maximum(speed, 1e-12)), v_cmd)
    v_cmd = np.where(dist_goal < p.goal_tolerance, 0.0, v_cmd)

    # pairwise repulsion inside the sensing radius, diverging near contact
    delta = pos[:, :, None, :] - pos[:, None, :, :]   # (E, A, A, 2) i minus j
    dist = np.linalg.norm(delta, axis=-1)             # (E, A, A)
    np.einsum("eaa->ea", dist)[:] = np.inf            # ignore self
    near = dist < p.sense_radius
    safe = np.maximum(dist, 1e-9)
    strength = np.where(near, p.sense_radius / safe - 1.0, 0.0)
    away = delta / safe[..., None]
    # counter-clockwise perpendicular of the away direction: each agent
    # sidesteps to its own right relative to its direction of travel
    perp = np.stack([-away[..., 1], away[..., 0]], axis=-1)
    v_rep = np.sum(
        strength[..., None] * (p.repulse_gain * away + p.bias_gain * perp), axis=2
    )
    return v_cmd + v_rep


def goals_reached(world: WorldBatch, goals: np.ndarray, tolerance: float = 0.1) -> np.ndarray:
    """(E, A) mask of agents within tolerance of their goals."""
    return np.linalg.norm(goals - world.pos, axis=-1) <= tolerance
