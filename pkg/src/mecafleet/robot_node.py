"""Per-robot driver loop.

Accepts body-twist, wheel-speed, or trajectory commands over the
infrastructure channel, runs the estimator and tracking controller at the
control rate, publishes telemetry on its subscription schedule, and
enforces the emergency-stop gate as the final stage before wheel output.
Time is always injected; the node never reads a wall clock.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .canproto import (
    BusReassembler,
    CanFrame,
    Subscription,
    SubscriptionRegistry,
    TransportPacket,
    fragment,
)
from .control import LqrWeights, TrackingController
from .control.references import (
    ReferencePoint,
    circle_reference,
    line_reference,
    waypoint_reference,
)
from .estimator import FilterConfig, KalmanEstimator, ObservationSource, PoseObservation, RobotState
from .fleetnet import (
    CMD_SET_TELEMETRY,
    CommandChannel,
    CommandKind,
    EstopLatch,
    EstopReason,
    EstopState,
    FleetCommand,
    HeartbeatMonitor,
)
from .fleetnet.commands import CMD_ID_TELEMETRY, TrajectorySpec
from .kinematics import (
    BodyTwist,
    ChassisGeometry,
    DEFAULT_GEOMETRY,
    WheelSpeeds,
    forward_kinematics,
    inverse_kinematics,
    saturate_wheel_speeds,
)

BATTERY_BUDGET_WH = 25.91
COMMAND_STALENESS_S = 0.2
BACKEND_FAILURE_LIMIT = 5


class DriveMode(Enum):
    IDLE = "idle"
    BODY_TWIST = "body_twist"
    WHEEL_DIRECT = "wheel_direct"
    TRAJECTORY = "trajectory"


@dataclass(frozen=True, slots=True)
class Telemetry:
    robot_id: int
    state: RobotState
    wheel_speeds: WheelSpeeds
    battery_pct: float
    attitude: tuple[float, float, float]     # roll, pitch, yaw
    estop: EstopState
    cpu_pct: float
    mem_pct: float
    t: float

    _WIRE = struct.Struct("<BdfffffffffffffBBfff")

    def pack(self) -> bytes:
        reason_idx = 255 if self.estop.reason is None else list(EstopReason).index(self.estop.reason)
        return self._WIRE.pack(
            self.robot_id, self.t,
            self.state.p[0], self.state.p[1], self.state.v[0], self.state.v[1],
            self.state.theta, self.state.omega,
            *self.wheel_speeds,
            *self.attitude,
            1 if self.estop.latched else 0, reason_idx,
            self.battery_pct, self.cpu_pct, self.mem_pct,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "Telemetry":
        (rid, t, px, py, vx, vy, theta, omega,
         fl, fr, rl, rr, roll, pitch, yaw,
         latched, reason_idx, battery, cpu, mem) = cls._WIRE.unpack(data)
        reason = None if reason_idx == 255 else list(EstopReason)[reason_idx]
        return cls(
            robot_id=rid,
            state=RobotState(np.array([px, py]), np.array([vx, vy]), theta, omega, t),
            wheel_speeds=WheelSpeeds(fl, fr, rl, rr),
            battery_pct=battery,
            attitude=(roll, pitch, yaw),
            estop=EstopState(bool(latched), reason, 0.0),
            cpu_pct=cpu,
            mem_pct=mem,
            t=t,
        )


class BackendError(RuntimeError):
    """Bus or simulator backend unreachable."""


class SimAgentBackend:
    """Adapts one agent slot of a WorldBatch as a robot's bus backend.

    Wheel command packets arrive as CAN frames, are reassembled and
    decoded, and their forward kinematics become the simulator's velocity
    command. Observations are the simulator truth, optionally with seeded
    noise. Battery drains in proportion to integrated motor force.
    """

    def __init__(
        self,
        world,
        agent_index: int,
        env_index: int = 0,
        geometry: ChassisGeometry = DEFAULT_GEOMETRY,
        obs_noise_p: float = 0.0,
        obs_noise_theta: float = 0.0,
        seed: int = 0,
    ):
        self.world = world
        self.agent = agent_index
        self.env = env_index
        self.geometry = geometry
        self.obs_noise_p = obs_noise_p
        self.obs_noise_theta = obs_noise_theta
        self._rng = np.random.default_rng(seed)
        self.reassembler = BusReassembler()
        self.last_command = BodyTwist()
        self.commands_received = 0

    def apply_wheel_frames(self, frames: list[CanFrame]) -> None:
        for frame in frames:
            for pkt in self.reassembler.push(frame):
                fl, fr, rl, rr = struct.unpack("<ffff", pkt.payload[12:28])
                self.last_command = forward_kinematics(WheelSpeeds(fl, fr, rl, rr), self.geometry)
                self.commands_received += 1

    def observe(self, now: float) -> PoseObservation:
        p = self.world.pos[self.env, self.agent].copy()
        theta = float(self.world.theta[self.env, self.agent])
        if self.obs_noise_p > 0.0:
            p = p + self._rng.normal(0.0, self.obs_noise_p, size=2)
        if self.obs_noise_theta > 0.0:
            theta += float(self._rng.normal(0.0, self.obs_noise_theta))
        return PoseObservation(p_meas=p, theta_meas=theta, t=now, source=ObservationSource.SIM)

    def battery_pct(self) -> float:
        # 1 N s of motor effort costs 1 J against the pack budget
        joules = float(self.world.force_integral[self.env, self.agent])
        budget_j = BATTERY_BUDGET_WH * 3600.0
        return max(0.0, 100.0 * (1.0 - joules / budget_j))


@dataclass
class NodeConfig:
    robot_id: int = 16
    control_period: float = 0.02
    telemetry_rate_hz: float = 10.0
    staleness_s: float = COMMAND_STALENESS_S
    operator_id: int = 1
    bus_arbitration_id: int | None = None      # defaults to robot_id
    geometry: ChassisGeometry = field(default_factory=ChassisGeometry)
    weights: LqrWeights = field(default_factory=LqrWeights)
    filter_config: FilterConfig = field(default_factory=FilterConfig)
    heartbeat_watchdog: bool = False           # opt-in: scenario runs without an operator loop


@dataclass
class TickResult:
    wheels: WheelSpeeds
    telemetry: Telemetry | None
    mode: DriveMode


class RobotNode:
    """One robot's control process; tick-driven with injected time."""

    def __init__(
        self,
        config: NodeConfig,
        backend: SimAgentBackend,
        channel: CommandChannel | None = None,
    ):
        self.config = config
        self.backend = backend
        self.channel = channel
        self.latch = EstopLatch()
        self.heartbeat = HeartbeatMonitor(self.latch)
        self.estimator = KalmanEstimator(config.filter_config)
        self.controller = TrackingController(
            config.weights, config.geometry, dt=config.control_period
        )
        self.mode = DriveMode.IDLE
        self.mode_log: list[tuple[float, DriveMode]] = []
        self._twist_cmd: tuple[BodyTwist, float] | None = None       # (twist, t_sent)
        self._wheel_cmd: tuple[WheelSpeeds, float] | None = None
        self._trajectory: TrajectorySpec | None = None
        self._trajectory_start: float = 0.0
        self._pending: list[FleetCommand] = []
        self.unknown_commands = 0
        self.backend_failures = 0
        self._telemetry_seq = 0
        self.subscriptions = SubscriptionRegistry()
        self.subscriptions.register(
            Subscription(
                topic=(CMD_SET_TELEMETRY, CMD_ID_TELEMETRY),
                rate_hz=config.telemetry_rate_hz,
                subscriber=config.operator_id,
            ),
            now=0.0,
        )

    # -- command ingress ----------------------------------------------------

    def ingest_packet(self, pkt: TransportPacket, now: float) -> None:
        """Direct packet injection (tests, recorded buses). Estop acts here,
        out of band; everything else queues for the next tick."""
        if pkt.dest_id != self.config.robot_id:
            return
        from .fleetnet.commands import UnknownCommandError, command_from_packet

        try:
            cmd = command_from_packet(pkt)
        except (UnknownCommandError, struct.error):
            self.unknown_commands += 1
            return
        self.ingest_command(cmd, now)

    def ingest_command(self, cmd: FleetCommand, now: float) -> None:
        if cmd.kind is CommandKind.ESTOP:
            self.latch.engage(cmd.body.reason, now)
            return
        if cmd.kind is CommandKind.ESTOP_RELEASE:
            self.latch.release(now)
            return
        if cmd.kind is CommandKind.HEARTBEAT:
            self.heartbeat.beat(now)
            return
        self._pending.append(cmd)

    def _set_mode(self, mode: DriveMode, now: float) -> None:
        if mode is not self.mode:
            self.mode = mode
            self.mode_log.append((now, mode))

    def _apply_pending(self, now: float) -> None:
        for cmd in self._pending:
            if cmd.kind is CommandKind.BODY_TWIST:
                self._twist_cmd = (cmd.body.twist, cmd.t_sent)
                self._set_mode(DriveMode.BODY_TWIST, now)
            elif cmd.kind is CommandKind.WHEEL_SPEEDS:
                self._wheel_cmd = (cmd.body.wheels, cmd.t_sent)
                self._set_mode(DriveMode.WHEEL_DIRECT, now)
            elif cmd.kind is CommandKind.SET_TRAJECTORY:
                spec = cmd.body.spec
                if spec.kind == "idle":
                    self._trajectory = None
                    self._set_mode(DriveMode.IDLE, now)
                else:
                    self._trajectory = spec
                    self._trajectory_start = now
                    self.controller.reset()
                    self._set_mode(DriveMode.TRAJECTORY, now)
            elif cmd.kind is CommandKind.PING:
                pass  # ack handled at the channel layer
            else:
                self.unknown_commands += 1
        self._pending.clear()

    # -- trajectory evaluation ----------------------------------------------

    def _reference(self, now: float) -> ReferencePoint:
        spec = self._trajectory
        t = now - self._trajectory_start
        if spec.kind == "line":
            length, a_max, v_max, ox, oy, direction = spec.params
            return line_reference(length, a_max, v_max, t, origin=(ox, oy), direction=direction)
        if spec.kind == "circle":
            diameter, speed, cx, cy = spec.params
            return circle_reference(diameter, speed, t, center=(cx, cy))
        if spec.kind == "waypoints":
            a_max, v_max = spec.params
            return waypoint_reference(list(spec.waypoints), a_max, v_max, t)
        raise ValueError(f"unsupported trajectory kind {spec.kind!r}")

    def current_reference(self, now: float) -> ReferencePoint | None:
        """The reference this node would track at ``now``, if any."""
        if self.mode is DriveMode.TRAJECTORY and self._trajectory is not None:
            return self._reference(now)
        return None

    # -- main loop ----------------------------------------------------------

    def node_tick(self, now: float) -> TickResult:
        """One control tick: ingest, estimate, compute, gate, emit."""
        if self.channel is not None:
            polled = self.channel.poll(now)
            self.unknown_commands += polled.unknown
            for cmd in polled.commands:
                self.ingest_command(cmd, now)
        self._apply_pending(now)

        if self.config.heartbeat_watchdog:
            self.heartbeat.check(now)

        try:
            observation = self.backend.observe(now)
        except Exception:
            observation = None
            self.backend_failures += 1
            if self.backend_failures >= BACKEND_FAILURE_LIMIT and not self.latch.latched:
                self.latch.engage(EstopReason.INTERNAL, now)
        else:
            self.backend_failures = 0
        if observation is not None and observation.t >= self.estimator.t:
            self.estimator.update(observation)

        wheels = self._compute_wheels(now)

        # estop gate: the one stage nothing downstream can override
        if self.latch.latched:
            wheels = WheelSpeeds(0.0, 0.0, 0.0, 0.0)

        self._emit_wheels(wheels, now)

        telemetry = None
        if self.subscriptions.pop_due(now):
            telemetry = self.build_telemetry(wheels, now)
            if self.channel is not None:
                self._send_telemetry(telemetry)
        return TickResult(wheels=wheels, telemetry=telemetry, mode=self.mode)

    def _compute_wheels(self, now: float) -> WheelSpeeds:
        if self.mode is DriveMode.BODY_TWIST and self._twist_cmd is not None:
            twist, t_sent = self._twist_cmd
            if now - t_sent > self.config.staleness_s:
                self._twist_cmd = None      # stale command discarded
                return WheelSpeeds(0.0, 0.0, 0.0, 0.0)
            return inverse_kinematics(twist, self.config.geometry)
        if self.mode is DriveMode.WHEEL_DIRECT and self._wheel_cmd is not None:
            wheels, t_sent = self._wheel_cmd
            if now - t_sent > self.config.staleness_s:
                self._wheel_cmd = None
                return WheelSpeeds(0.0, 0.0, 0.0, 0.0)
            return saturate_wheel_speeds(wheels)
        if self.mode is DriveMode.TRAJECTORY and self._trajectory is not None:
            if self.estimator.initialized:
                twist = self.controller.control_step(self.estimator.state, self._reference(now))
                return inverse_kinematics(twist, self.config.geometry)
        return WheelSpeeds(0.0, 0.0, 0.0, 0.0)

    def _emit_wheels(self, wheels: WheelSpeeds, now: float) -> None:
        payload = struct.pack("<Id", self._telemetry_seq & 0xFFFFFFFF, now)
        payload += struct.pack("<ffff", *wheels)
        pkt = TransportPacket(
            source_id=self.config.robot_id,
            dest_id=0xF0,                     # bus controller address
            seq=self._telemetry_seq & 0xFFFF,
            cmd_set=0x10,
            cmd_id=0x01,
            payload=payload,
        )
        self._telemetry_seq += 1
        arbitration = self.config.bus_arbitration_id
        if arbitration is None:
            arbitration = self.config.robot_id & 0x7FF
        self.backend.apply_wheel_frames(fragment(pkt, arbitration))

    def build_telemetry(self, wheels: WheelSpeeds, now: float) -> Telemetry:
        state = self.estimator.state if self.estimator.initialized else RobotState.at_rest(t=now)
        rid = self.config.robot_id
        return Telemetry(
            robot_id=rid,
            state=state,
            wheel_speeds=wheels,
            battery_pct=self.backend.battery_pct(),
            attitude=(0.0, 0.0, state.theta),
            estop=self.latch.state,
            cpu_pct=20.0 + 15.0 * (0.5 + 0.5 * math.sin(0.7 * now + rid)),
            mem_pct=25.0 + (rid % 8) * 3.0,
            t=now,
        )

    def _send_telemetry(self, telemetry: Telemetry) -> None:
        pkt = TransportPacket(
            source_id=self.config.robot_id,
            dest_id=self.config.operator_id,
            seq=self._telemetry_seq & 0xFFFF,
            cmd_set=CMD_SET_TELEMETRY,
            cmd_id=CMD_ID_TELEMETRY,
            payload=telemetry.pack(),
        )
        self._telemetry_seq += 1
        self.channel.send_packet(pkt)
