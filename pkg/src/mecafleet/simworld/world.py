"""Batched holonomic point-robot dynamics.

Every operation applies one uniform rule across the whole
(environments x agents) batch with no cross-environment coupling, so a
batch of identical environments stays bitwise identical to independent
single-environment runs.

Step order: PID force from the velocity command, linear drag,
semi-implicit Euler velocity update, pairwise collision resolution,
position integration, arena wall clamp with restitution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# force cap from the wheel torque limit: 4 wheels x 0.25 Nm / 0.05 m
WHEEL_FORCE_CAP_N = 20.0


@dataclass(frozen=True)
class PhysicsParams:
    mass: float = 3.0
    linear_drag: float = 1.0          # N s/m
    force_cap: float = WHEEL_FORCE_CAP_N
    robot_radius: float = 0.20       # circumscribes the 240 x 320 mm footprint
    restitution: float = 0.5
    arena_half_x: float = 5.0
    arena_half_y: float = 5.0

    def __post_init__(self) -> None:
        if self.mass <= 0 or self.robot_radius <= 0:
            raise ValueError("mass and robot_radius must be positive")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")


@dataclass(frozen=True)
class PidGains:
    kp: float = 60.0
    ki: float = 20.0
    kd: float = 0.0
    integral_clamp: float = 10.0     # clamp on the integral force contribution, N

    def __post_init__(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("gains must be nonnegative")


@dataclass
class WorldBatch:
    """State arrays shaped (n_envs, n_agents, ...); stepped in place."""

    pos: np.ndarray            # (E, A, 2) m
    vel: np.ndarray            # (E, A, 2) m/s
    theta: np.ndarray          # (E, A) rad
    omega: np.ndarray          # (E, A) rad/s
    pid_integral: np.ndarray   # (E, A, 2) accumulated velocity error, m
    pid_prev_err: np.ndarray   # (E, A, 2) m/s, for the derivative term
    force_integral: np.ndarray | None = None  # (E, A) integrated motor force, N s
    dt: float = 0.01
    params: PhysicsParams = field(default_factory=PhysicsParams)
    gains: PidGains = field(default_factory=PidGains)
    collision_events: int = 0
    _in_contact: np.ndarray | None = None  # (E, A, A) persistent contact mask

    @property
    def n_envs(self) -> int:
        return self.pos.shape[0]

    @property
    def n_agents(self) -> int:
        return self.pos.shape[1]

    @staticmethod
    def create(
        n_envs: int,
        n_agents: int,
        dt: float = 0.01,
        params: PhysicsParams | None = None,
        gains: PidGains | None = None,
    ) -> "WorldBatch":
        if n_envs < 1 or n_agents < 1:
            raise ValueError("need at least one environment and one agent")
        if dt <= 0:
            raise ValueError("dt must be positive")
        shape2 = (n_envs, n_agents, 2)
        return WorldBatch(
            pos=np.zeros(shape2),
            vel=np.zeros(shape2),
            theta=np.zeros((n_envs, n_agents)),
            omega=np.zeros((n_envs, n_agents)),
            pid_integral=np.zeros(shape2),
            pid_prev_err=np.zeros(shape2),
            force_integral=np.zeros((n_envs, n_agents)),
            dt=dt,
            params=params or PhysicsParams(),
            gains=gains or PidGains(),
        )

    def copy(self) -> "WorldBatch":
        return replace(
            self,
            pos=self.pos.copy(),
            vel=self.vel.copy(),
            theta=self.theta.copy(),
            omega=self.omega.copy(),
            pid_integral=self.pid_integral.copy(),
            pid_prev_err=self.pid_prev_err.copy(),
            force_integral=self.force_integral.copy(),
            _in_contact=None if self._in_contact is None else self._in_contact.copy(),
        )

    def env_slice(self, index: int) -> "WorldBatch":
        """Single-environment view (copied), for batch-equivalence checks."""
        sl = slice(index, index + 1)
        return replace(
            self,
            pos=self.pos[sl].copy(),
            vel=self.vel[sl].copy(),
            theta=self.theta[sl].copy(),
            omega=self.omega[sl].copy(),
            pid_integral=self.pid_integral[sl].copy(),
            pid_prev_err=self.pid_prev_err[sl].copy(),
            force_integral=self.force_integral[sl].copy(),
            _in_contact=None if self._in_contact is None else self._in_contact[sl].copy(),
        )


def pid_force(
    v_ref: np.ndarray,
    v: np.ndarray,
    integral: np.ndarray,
    prev_err: np.ndarray,
    gains: PidGains,
    dt: float,
    force_cap: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Velocity-error PID with anti-windup and a norm-preserving force cap.

    Returns (force, new_integral, new_prev_err); inputs are not mutated.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    err = v_ref - v
    integral = integral + err * dt
    if gains.ki > 0.0:
        # anti-windup: bound the integral contribution per axis
        bound = gains.integral_clamp / gains.ki
        integral = np.clip(integral, -bound, bound)
    force = gains.kp * err + gains.ki * integral
    if gains.kd > 0.0:
        force = force + gains.kd * (err - prev_err) / dt
    norm = np.linalg.norm(force, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(norm > force_cap, force_cap / norm, 1.0)
    force = force * scale
    return force, integral, err


def _pairs(n_agents: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)]


def _separate_pairs(world: WorldBatch) -> bool:
    """One fixed-order separation pass; True if any pair overlapped."""
    pos = world.pos
    min_dist = 2.0 * world.params.robot_radius
    any_overlap = False
    for i, j in _pairs(world.n_agents):
        delta = pos[:, j] - pos[:, i]
        dist = np.linalg.norm(delta, axis=-1)
        overlap = dist < min_dist
        if not np.any(overlap):
            continue
        any_overlap = True
        safe = np.maximum(dist, 1e-12)
        normal = np.where(dist[:, None] > 0.0, delta / safe[:, None], np.array([1.0, 0.0]))
        push = np.where(overlap, (min_dist - dist) * 0.5, 0.0)
        pos[:, i] -= push[:, None] * normal
        pos[:, j] += push[:, None] * normal
    return any_overlap


def _contact_impulses(world: WorldBatch) -> None:
    """Reflect the normal relative velocity of approaching overlapping pairs.

    Equal masses: the normal components exchange, scaled by restitution;
    tangential velocity is untouched. Counts entering-contact events.
    """
    n_agents = world.n_agents
    pos, vel = world.pos, world.vel
    restitution = world.params.restitution
    min_dist = 2.0 * world.params.robot_radius

    if world._in_contact is None or world._in_contact.shape[1] != n_agents:
        world._in_contact = np.zeros((world.n_envs, n_agents, n_agents), dtype=bool)

    for i, j in _pairs(n_agents):
        delta = pos[:, j] - pos[:, i]
        dist = np.linalg.norm(delta, axis=-1)
        overlap = dist < min_dist
        if not np.any(overlap):
            world._in_contact[:, i, j] = False
            continue
        world.collision_events += int(np.sum(overlap & ~world._in_contact[:, i, j]))
        world._in_contact[:, i, j] = overlap

        safe = np.maximum(dist, 1e-12)
        normal = np.where(dist[:, None] > 0.0, delta / safe[:, None], np.array([1.0, 0.0]))
        v_rel = vel[:, j] - vel[:, i]
        v_norm = np.sum(v_rel * normal, axis=-1)
        approaching = overlap & (v_norm < 0.0)
        impulse = np.where(approaching, (1.0 + restitution) * 0.5 * v_norm, 0.0)
        vel[:, i] += impulse[:, None] * normal
        vel[:, j] -= impulse[:, None] * normal


def _clamp_to_arena(world: WorldBatch, reflect: bool) -> None:
    params = world.params
    lim_x = params.arena_half_x - params.robot_radius
    lim_y = params.arena_half_y - params.robot_radius
    for axis, lim in ((0, lim_x), (1, lim_y)):
        coord = world.pos[..., axis]
        out_high = coord > lim
        out_low = coord < -lim
        world.pos[..., axis] = np.clip(coord, -lim, lim)
        if reflect:
            v_axis = world.vel[..., axis]
            world.vel[..., axis] = np.where(
                (out_high & (v_axis > 0.0)) | (out_low & (v_axis < 0.0)),
                -params.restitution * v_axis,
                v_axis,
            )


def resolve_collisions(world: WorldBatch) -> WorldBatch:
    """Separate overlapping agent pairs and exchange normal velocity.

    Pairs are processed in fixed (i, j) index order for determinism;
    impulses apply once per call, position separation iterates until no
    overlap remains (a later pair's correction can push an agent back
    into an earlier one). Coincident centres separate along +x.
    """
    if world.n_agents < 2:
        return world
    _contact_impulses(world)
    for _ in range(16):
        if not _separate_pairs(world):
            break
    return world


def step(
    world: WorldBatch,
    v_ref: np.ndarray,
    omega_ref: np.ndarray | None = None,
) -> WorldBatch:
    """Advance the whole batch by one physics tick of world.dt seconds.

    ``v_ref`` is the commanded world-frame velocity, (E, A, 2). Yaw rate
    is actuated directly when ``omega_ref`` is given (wheel speed control
    makes the yaw channel effectively velocity-commanded). After the
    velocity and position updates, positions are projected jointly onto
    the no-overlap and arena constraints so a step never ends
    interpenetrating.
    """
    expected = (world.n_envs, world.n_agents, 2)
    v_ref = np.asarray(v_ref, dtype=float)
    if v_ref.shape != expected:
        raise ValueError(f"v_ref shape {v_ref.shape}, expected {expected}")

    params, gains, dt = world.params, world.gains, world.dt
    force, world.pid_integral, world.pid_prev_err = pid_force(
        v_ref, world.vel, world.pid_integral, world.pid_prev_err, gains, dt, params.force_cap
    )
    world.force_integral = world.force_integral + np.linalg.norm(force, axis=-1) * dt
    force = force - params.linear_drag * world.vel
    world.vel = world.vel + (force / params.mass) * dt

    world.pos = world.pos + world.vel * dt

    if omega_ref is not None:
        omega_ref = np.asarray(omega_ref, dtype=float)
        if omega_ref.shape != (world.n_envs, world.n_agents):
            raise ValueError(f"omega_ref shape {omega_ref.shape}")
        world.omega = omega_ref.copy()
    world.theta = np.arctan2(np.sin(world.theta + world.omega * dt),
                             np.cos(world.theta + world.omega * dt))

    if world.n_agents >= 2:
        _contact_impulses(world)
    _clamp_to_arena(world, reflect=True)
    for _ in range(16):
        if world.n_agents >= 2 and _separate_pairs(world):
            _clamp_to_arena(world, reflect=False)
        else:
            break
    return world


def total_kinetic_energy(world: WorldBatch) -> np.ndarray:
    """Per-environment kinetic energy, for decay checks."""
    return 0.5 * world.params.mass * np.sum(world.vel**2, axis=(1, 2))
