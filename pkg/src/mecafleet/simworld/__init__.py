"""Vectorized multi-agent 2D simulation with a PID velocity-to-force layer."""

from .world import PhysicsParams, PidGains, WorldBatch, pid_force, resolve_collisions, step
from .scenarios import SwapPolicyParams, make_scenario, scripted_swap_policy

__all__ = [
    "WorldBatch",
    "PhysicsParams",
    "PidGains",
    "pid_force",
    "step",
    "resolve_collisions",
    "make_scenario",
    "scripted_swap_policy",
    "SwapPolicyParams",
]
