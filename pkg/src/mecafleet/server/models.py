"""Versioned JSON schema (v1) shared by the gateway and the console."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

SCHEMA_V = 1


class TelemetryFrame(BaseModel):
    v: int = SCHEMA_V
    robot_id: int
    t: float
    x: float
    y: float
    theta: float
    vx: float
    vy: float
    omega: float
    wheels: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    battery_pct: float = 100.0
    estop_latched: bool = False
    estop_reason: Optional[str] = None
    cpu_pct: float = 0.0
    mem_pct: float = 0.0


class RosterRobot(BaseModel):
    robot_id: int
    connectivity: Literal["connected", "degraded", "lost"]
    estop_latched: bool = False
    estop_reason: Optional[str] = None
    battery_pct: float = 100.0
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    goal: Optional[tuple[float, float]] = None
    last_seen: float = 0.0


class RosterResponse(BaseModel):
    v: int = SCHEMA_V
    t: float
    scenario: str
    running: bool
    robots: list[RosterRobot]


class TwistParams(BaseModel):
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0


class TrajectoryParams(BaseModel):
    kind: Literal["idle", "line", "circle", "waypoints"] = "idle"
    length: float = 2.0
    a_max: float = 2.0
    v_max: float = 1.0
    diameter: float = 1.5
    speed: float = 1.0
    waypoints: list[tuple[float, float]] = Field(default_factory=list)


class DispatchRequest(BaseModel):
    v: int = SCHEMA_V
    command: Literal["body_twist", "set_trajectory", "idle", "ping"]
    targets: list[int]
    twist: Optional[TwistParams] = None
    trajectory: Optional[TrajectoryParams] = None
    ack_timeout_s: float = 1.0


class TargetStatus(BaseModel):
    robot_id: int
    status: Literal["pending", "acked", "timeout"]
    acked_at: Optional[float] = None


class DispatchResponse(BaseModel):
    v: int = SCHEMA_V
    command: str
    statuses: list[TargetStatus]


class EstopRequest(BaseModel):
    v: int = SCHEMA_V
    action: Literal["engage", "release"]
    confirm: bool = False       # release requires an explicit confirmation


class EstopResponse(BaseModel):
    v: int = SCHEMA_V
    action: str
    applied: bool
    statuses: list[TargetStatus] = Field(default_factory=list)
    detail: str = ""


class StatusResponse(BaseModel):
    v: int = SCHEMA_V
    scenario: str
    running: bool
    mode: Literal["sim", "replay"]
    sim_time: float
    tick: int


class Envelope(BaseModel):
    """WebSocket message wrapper, server to client."""

    v: int = SCHEMA_V
    type: Literal["telemetry", "roster", "ack", "status", "error"]
    data: dict


class HealthResponse(BaseModel):
    status: str = "ok"
