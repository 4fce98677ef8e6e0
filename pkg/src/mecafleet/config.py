"""Scenario configuration: versioned YAML schema, validation, env overrides.

Documented environment overrides (applied after file parsing):

    FLEET_INFRA_PORT    network.infra_port
    FLEET_GATEWAY_PORT  network.gateway_port
    FLEET_PEER_PORT     network.peer_port
    FLEET_OUTPUT_DIR    outputs.dir
    FLEET_SEED          seed
"""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from .control import LqrWeights
from .estimator import FilterConfig
from .kinematics import ChassisGeometry
from .simworld import PhysicsParams, PidGains, SwapPolicyParams

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries field locations."""


class LineSpec(BaseModel):
    length: float = 5.0
    a_max: float = 5.0
    v_max: float = 4.45

    @field_validator("length", "a_max", "v_max")
    @classmethod
    def positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v


class CircleSpec(BaseModel):
    diameter: float = 1.5
    speed: float = 1.7

    @field_validator("diameter", "speed")
    @classmethod
    def positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v


class CustomSpec(BaseModel):
    starts: list[tuple[float, float]] = Field(default_factory=list)
    goals: Optional[list[tuple[float, float]]] = None


class ScenarioSpec(BaseModel):
    kind: Literal["line_track", "circle_track", "swap_8", "custom"] = "swap_8"
    line: LineSpec = Field(default_factory=LineSpec)
    circle: CircleSpec = Field(default_factory=CircleSpec)
    custom: CustomSpec = Field(default_factory=CustomSpec)


class PhysicsSection(BaseModel):
    mass: float = 3.0
    linear_drag: float = 1.0
    force_cap: float = 20.0
    robot_radius: float = 0.20
    restitution: float = 0.5
    arena_half_x: float = 5.0
    arena_half_y: float = 5.0
    dt: float = 0.01

    def to_params(self) -> PhysicsParams:
        return PhysicsParams(
            mass=self.mass,
            linear_drag=self.linear_drag,
            force_cap=self.force_cap,
            robot_radius=self.robot_radius,
            restitution=self.restitution,
            arena_half_x=self.arena_half_x,
            arena_half_y=self.arena_half_y,
        )


class PidSection(BaseModel):
    kp: float = 60.0
    ki: float = 20.0
    kd: float = 0.0
    integral_clamp: float = 10.0

    def to_gains(self) -> PidGains:
        return PidGains(kp=self.kp, ki=self.ki, kd=self.kd, integral_clamp=self.integral_clamp)


class ChassisSection(BaseModel):
    wheel_radius: float = 0.05
    half_length: float = 0.10
    half_width: float = 0.10
    omega_max_dps: float = 600.0

    def to_geometry(self) -> ChassisGeometry:
        return ChassisGeometry(
            wheel_radius=self.wheel_radius,
            half_length=self.half_length,
            half_width=self.half_width,
            omega_max=math.radians(self.omega_max_dps),
        )


class ControllerSection(BaseModel):
    dt: float = 0.02
    q_pos: float = 10.0
    q_vel: float = 2.0
    r_accel: float = 1.0
    q_theta: float = 10.0
    q_omega: float = 2.0
    r_yaw: float = 1.0

    def to_weights(self) -> LqrWeights:
        return LqrWeights(
            q_pos=self.q_pos, q_vel=self.q_vel, r_accel=self.r_accel,
            q_theta=self.q_theta, q_omega=self.q_omega, r_yaw=self.r_yaw,
        )


class FilterSection(BaseModel):
    q: float = 1.0
    r_p: float = 1e-6
    r_theta: float = 1e-6
    gate: float = 9.21

    def to_config(self) -> FilterConfig:
        return FilterConfig(q=self.q, r_p=self.r_p, r_theta=self.r_theta, gate=self.gate)


class PolicySection(BaseModel):
    v_cap: float = 1.1
    goal_gain: float = 1.4
    sense_radius: float = 1.2
    repulse_gain: float = 0.6
    bias_gain: float = 0.45
    goal_tolerance: float = 0.03

    def to_params(self) -> SwapPolicyParams:
        return SwapPolicyParams(
            v_cap=self.v_cap, goal_gain=self.goal_gain, sense_radius=self.sense_radius,
            repulse_gain=self.repulse_gain, bias_gain=self.bias_gain,
            goal_tolerance=self.goal_tolerance,
        )


class NetworkSection(BaseModel):
    loss_rate: float = 0.0
    reorder: Literal["none", "shuffle", "reverse"] = "none"
    heartbeat_hz: float = 10.0
    heartbeat_timeout_s: float = 0.5
    infra_port: int = 47800
    peer_port: int = 47801
    gateway_port: int = 8000


class RobotEntry(BaseModel):
    id: int
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, theta
    controller: Optional[ControllerSection] = None       # per-robot weight override

    @field_validator("id")
    @classmethod
    def valid_node_id(cls, v: int) -> int:
        if not 0 <= v <= 255:
            raise ValueError("robot id must fit a node id (0-255)")
        return v


class Thresholds(BaseModel):
    peak_speed_min: Optional[float] = None
    max_error_max: Optional[float] = None
    mean_error_max: Optional[float] = None
    collisions_max: Optional[int] = None
    goal_time_max: Optional[float] = None
    goal_tolerance: float = 0.1


class OutputsSection(BaseModel):
    dir: str = "runs"


class ScenarioConfig(BaseModel):
    version: int = SCHEMA_VERSION
    name: str = "scenario"
    seed: int = 0
    duration_s: float = 10.0
    telemetry_rate_hz: float = 10.0
    scenario: ScenarioSpec = Field(default_factory=ScenarioSpec)
    physics: PhysicsSection = Field(default_factory=PhysicsSection)
    pid: PidSection = Field(default_factory=PidSection)
    chassis: ChassisSection = Field(default_factory=ChassisSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    filter: FilterSection = Field(default_factory=FilterSection)
    policy: PolicySection = Field(default_factory=PolicySection)
    network: NetworkSection = Field(default_factory=NetworkSection)
    robots: list[RobotEntry] = Field(default_factory=list)
    thresholds: Thresholds = Field(default_factory=Thresholds)
    outputs: OutputsSection = Field(default_factory=OutputsSection)

    @field_validator("version")
    @classmethod
    def supported_version(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {v}, expected {SCHEMA_VERSION}")
        return v

    @field_validator("duration_s")
    @classmethod
    def positive_duration(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v


_ENV_OVERRIDES = {
    "FLEET_INFRA_PORT": ("network", "infra_port", int),
    "FLEET_GATEWAY_PORT": ("network", "gateway_port", int),
    "FLEET_PEER_PORT": ("network", "peer_port", int),
    "FLEET_OUTPUT_DIR": ("outputs", "dir", str),
    "FLEET_SEED": (None, "seed", int),
}


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "invalid scenario config:\n" + "\n".join(lines)


def load_config(
    path: str | Path | None = None,
    overrides: dict | None = None,
    env: dict | None = None,
) -> ScenarioConfig:
    """Parse, validate, and apply env/CLI overrides.

    Raises ConfigError with field paths (and YAML line numbers for parse
    errors).
    """
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"config is not valid YAML{where}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")

    for key, value in (overrides or {}).items():
        node = raw
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value

    env = os.environ if env is None else env
    for var, (section, field_name, cast) in _ENV_OVERRIDES.items():
        if var in env:
            try:
                value = cast(env[var])
            except ValueError as exc:
                raise ConfigError(f"env {var}: {exc}") from exc
            if section is None:
                raw[field_name] = value
            else:
                raw.setdefault(section, {})[field_name] = value

    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=True)
