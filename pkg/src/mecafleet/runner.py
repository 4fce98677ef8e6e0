"""Deterministic scenario harness.

Single-process runs step simulated time on a fixed schedule: the control
loop at the controller period, two physics substeps per control tick, the
operator heartbeat at 10 Hz, and telemetry per the node's subscription.
Given (config, seed), every artifact byte is reproducible.

Per control tick, in order: supervisor sends (policy or trajectory
commands, heartbeats), network delivers, each robot node ticks (ingest,
estimate, control, estop gate, wheel emit, telemetry), network delivers,
supervisor collects telemetry/acks, logs sample, physics substeps run.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .control.references import ReferencePoint
from .estimator import wrap_angle
from .fleetnet import (
    CommandChannel,
    CommandKind,
    ConnectivityStatus,
    EstopReason,
    SimNetwork,
)
from .fleetnet.commands import (
    BodyTwistCommand,
    EstopCommand,
    PingCommand,
    SetTrajectoryCommand,
    TrajectorySpec,
    WheelSpeedsCommand,
)
from .kinematics import BodyTwist, WheelSpeeds
from .metrics import write_metrics
from .robot_node import NodeConfig, RobotNode, SimAgentBackend, Telemetry
from .simworld import make_scenario, scripted_swap_policy, step

OPERATOR_ID = 1
DEFAULT_ROBOT_BASE_ID = 16

TELEMETRY_COLUMNS = [
    "t", "robot_id", "x", "y", "theta", "vx", "vy", "omega",
    "fl", "fr", "rl", "rr", "battery_pct", "latched", "reason",
    "cpu_pct", "mem_pct",
]


@dataclass
class DispatchRecord:
    robot_id: int
    kind: str
    seq: int
    sent_at: float
    deadline: float
    status: str = "pending"          # pending | acked | timeout
    acked_at: float | None = None


@dataclass
class RosterEntry:
    robot_id: int
    last_telemetry: Telemetry | None = None
    last_seen: float = -math.inf

    def connectivity(self, now: float, degraded_after: float = 0.15, lost_after: float = 0.5) -> ConnectivityStatus:
        gap = now - self.last_seen
        if gap <= degraded_after:
            return ConnectivityStatus.CONNECTED
        if gap <= lost_after:
            return ConnectivityStatus.DEGRADED
        return ConnectivityStatus.LOST


class FleetSupervisor:
    """Operator-side endpoint: heartbeats, dispatch, telemetry collection."""

    def __init__(self, channel: CommandChannel, robot_ids: list[int], heartbeat_hz: float = 10.0):
        self.channel = channel
        self.robot_ids = list(robot_ids)
        self.heartbeat_hz = heartbeat_hz
        self._next_heartbeat = 0.0
        self.roster: dict[int, RosterEntry] = {rid: RosterEntry(rid) for rid in robot_ids}
        self.dispatches: deque[DispatchRecord] = deque(maxlen=256)
        self.telemetry_log: deque[Telemetry] = deque(maxlen=4096)

    def send_heartbeats(self, now: float) -> None:
        if now + 1e-12 < self._next_heartbeat:
            return
        for rid in self.robot_ids:
            self.channel.send_command(CommandKind.HEARTBEAT, PingCommand(), rid, now=now)
        self._next_heartbeat = now + 1.0 / self.heartbeat_hz

    def dispatch(
        self,
        kind: CommandKind,
        body: object,
        targets: list[int],
        now: float,
        needs_ack: bool = True,
        ack_timeout: float = 1.0,
    ) -> list[DispatchRecord]:
        records = []
        for rid in targets:
            cmd = self.channel.send_command(kind, body, rid, now=now, needs_ack=needs_ack)
            record = DispatchRecord(
                robot_id=rid, kind=kind.value, seq=cmd.seq & 0xFFFF,
                sent_at=now, deadline=now + ack_timeout,
            )
            self.dispatches.append(record)
            records.append(record)
        return records

    def estop_all(self, now: float, reason: EstopReason = EstopReason.OPERATOR) -> list[DispatchRecord]:
        return self.dispatch(CommandKind.ESTOP, EstopCommand(reason), self.robot_ids, now)

    def release_all(self, now: float) -> list[DispatchRecord]:
        return self.dispatch(CommandKind.ESTOP_RELEASE, PingCommand(), self.robot_ids, now)

    def collect(self, now: float) -> list[Telemetry]:
        """Poll the channel: telemetry frames, acks, retransmissions."""
        result = self.channel.poll(now)
        fresh = []
        for pkt in result.acks:
            for record in self.dispatches:
                if record.status == "pending" and record.seq == pkt.seq and record.robot_id == pkt.source_id:
                    record.status = "acked"
                    record.acked_at = now
        for record in self.dispatches:
            if record.status == "pending" and now > record.deadline:
                record.status = "timeout"
        for pkt in result.telemetry:
            try:
                telemetry = Telemetry.unpack(pkt.payload)
            except struct.error:
                continue
            entry = self.roster.setdefault(pkt.source_id, RosterEntry(pkt.source_id))
            entry.last_telemetry = telemetry
            entry.last_seen = now
            fresh.append(telemetry)
            self.telemetry_log.append(telemetry)
        return fresh


@dataclass
class RunArtifacts:
    out_dir: Path
    metrics: dict
    passed: bool


class ScenarioRunner:
    """Builds the world, nodes, and supervisor from a config and runs them."""

    def __init__(self, config: ScenarioConfig, out_dir: str | Path | None = None):
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else Path(config.outputs.dir) / config.name
        kind = config.scenario.kind

        params = config.physics.to_params()
        gains = config.pid.to_gains()
        scenario_kwargs = {}
        if kind == "custom":
            scenario_kwargs["starts"] = np.asarray(config.scenario.custom.starts, dtype=float)
            if config.scenario.custom.goals is not None:
                scenario_kwargs["goals"] = np.asarray(config.scenario.custom.goals, dtype=float)
        self.world, self.goals = make_scenario(
            kind, n_envs=1, params=params, gains=gains, dt=config.physics.dt, **scenario_kwargs
        )
        if kind == "line_track":
            self.world.pos[0, 0] = [-config.scenario.line.length / 2.0, 0.0]
        if config.robots:
            if len(config.robots) != self.world.n_agents:
                raise ValueError(
                    f"scenario {kind} has {self.world.n_agents} agents but config lists "
                    f"{len(config.robots)} robots"
                )
            self.robot_ids = [entry.id for entry in config.robots]
            for i, entry in enumerate(config.robots):
                if kind == "custom":
                    self.world.pos[0, i] = entry.start[:2]
                    self.world.theta[0, i] = entry.start[2]
        else:
            self.robot_ids = [DEFAULT_ROBOT_BASE_ID + i for i in range(self.world.n_agents)]

        self.network = SimNetwork(
            seed=config.seed,
            loss_rate=config.network.loss_rate,
            reorder=config.network.reorder,
        )
        self.supervisor = FleetSupervisor(
            CommandChannel(self.network.socket(OPERATOR_ID), OPERATOR_ID),
            self.robot_ids,
            heartbeat_hz=config.network.heartbeat_hz,
        )
        geometry = config.chassis.to_geometry()
        self.nodes: dict[int, RobotNode] = {}
        self.backends: dict[int, SimAgentBackend] = {}
        for index, rid in enumerate(self.robot_ids):
            controller_section = config.controller
            if config.robots and config.robots[index].controller is not None:
                controller_section = config.robots[index].controller
            backend = SimAgentBackend(self.world, agent_index=index, geometry=geometry)
            node = RobotNode(
                NodeConfig(
                    robot_id=rid,
                    control_period=config.controller.dt,
                    telemetry_rate_hz=config.telemetry_rate_hz,
                    operator_id=OPERATOR_ID,
                    geometry=geometry,
                    weights=controller_section.to_weights(),
                    filter_config=config.filter.to_config(),
                    heartbeat_watchdog=True,
                ),
                backend,
                CommandChannel(self.network.socket(rid), rid),
            )
            node.heartbeat.timeout = config.network.heartbeat_timeout_s
            self.nodes[rid] = node
            self.backends[rid] = backend

        self.control_dt = config.controller.dt
        self.substeps = max(1, round(self.control_dt / config.physics.dt))
        self.policy_params = config.policy.to_params()
        self.events: list[tuple[float, str, str]] = []
        self._trajectory_sent = False
        self._estop_seen: dict[int, bool] = {rid: False for rid in self.robot_ids}
        self._injected: deque = deque()
        self.tick_index = 0
        self._log_rows: dict[int, list[list]] = {rid: [] for rid in self.robot_ids}
        self._telemetry_rows: dict[int, list[list]] = {rid: [] for rid in self.robot_ids}

    # -- command injection (gateway/serve mode) ------------------------------

    def inject(self, fn) -> None:
        """Queue a callable(supervisor, now) to run at the next tick start."""
        self._injected.append(fn)

    # -- per-tick pipeline ----------------------------------------------------

    def _trajectory_spec(self) -> TrajectorySpec | None:
        scenario = self.config.scenario
        if scenario.kind == "line_track":
            # segment centred on the origin so the run stays clear of the walls
            line = scenario.line
            return TrajectorySpec(
                "line", (line.length, line.a_max, line.v_max, -line.length / 2.0, 0.0, 0.0)
            )
        if scenario.kind == "circle_track":
            circle = scenario.circle
            return TrajectorySpec("circle", (circle.diameter, circle.speed, 0.0, 0.0))
        return None

    def _supervisor_phase(self, now: float) -> None:
        while self._injected:
            self._injected.popleft()(self.supervisor, now)
        self.supervisor.send_heartbeats(now)
        spec = self._trajectory_spec()
        if spec is not None and not self._trajectory_sent:
            self.supervisor.dispatch(
                CommandKind.SET_TRAJECTORY, SetTrajectoryCommand(spec), self.robot_ids, now
            )
            self._trajectory_sent = True
        if self.goals is not None:
            # centralized policy from mocap-grade world truth, at the command rate
            v_world = scripted_swap_policy(self.world, self.goals, self.policy_params)[0]
            theta = self.world.theta[0]
            cos_t, sin_t = np.cos(theta), np.sin(theta)
            for index, rid in enumerate(self.robot_ids):
                vx = cos_t[index] * v_world[index, 0] + sin_t[index] * v_world[index, 1]
                vy = -sin_t[index] * v_world[index, 0] + cos_t[index] * v_world[index, 1]
                self.supervisor.channel.send_command(
                    CommandKind.BODY_TWIST,
                    BodyTwistCommand(BodyTwist(float(vx), float(vy), 0.0)),
                    rid,
                    now=now,
                )

    def _physics_phase(self) -> None:
        theta = self.world.theta[0]
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        v_world = np.zeros((1, self.world.n_agents, 2))
        omega = np.zeros((1, self.world.n_agents))
        for index, rid in enumerate(self.robot_ids):
            twist = self.backends[rid].last_command
            v_world[0, index, 0] = cos_t[index] * twist.vx - sin_t[index] * twist.vy
            v_world[0, index, 1] = sin_t[index] * twist.vx + cos_t[index] * twist.vy
            omega[0, index] = twist.omega
        for _ in range(self.substeps):
            step(self.world, v_world, omega_ref=omega)

    def _log_phase(self, now: float) -> None:
        collisions_before = getattr(self, "_collisions_logged", 0)
        if self.world.collision_events > collisions_before:
            for _ in range(self.world.collision_events - collisions_before):
                self.events.append((now, "collision", ""))
            self._collisions_logged = self.world.collision_events
        for index, rid in enumerate(self.robot_ids):
            node = self.nodes[rid]
            latched = node.latch.latched
            if latched != self._estop_seen[rid]:
                kind = "estop_engage" if latched else "estop_release"
                reason = node.latch.state.reason.value if node.latch.state.reason else ""
                self.events.append((now, kind, f"robot={rid} reason={reason}"))
                self._estop_seen[rid] = latched

            pos = self.world.pos[0, index]
            vel = self.world.vel[0, index]
            theta = float(self.world.theta[0, index])
            ref = node.current_reference(now)
            if ref is None and self.goals is not None:
                goal = self.goals[0, index]
                ref = ReferencePoint(goal, np.zeros(2), 0.0, now)
            if ref is not None:
                err = float(np.hypot(pos[0] - ref.p_ref[0], pos[1] - ref.p_ref[1]))
                row = [now, pos[0], pos[1], theta, vel[0], vel[1],
                       ref.p_ref[0], ref.p_ref[1], ref.v_ref[0], ref.v_ref[1], err]
            else:
                row = [now, pos[0], pos[1], theta, vel[0], vel[1], "", "", "", "", ""]
            self._log_rows[rid].append(row)

    def control_tick(self) -> float:
        """One full control cycle; returns the tick's timestamp."""
        now = round(self.tick_index * self.control_dt, 9)
        self._supervisor_phase(now)
        self.network.deliver()
        for rid in self.robot_ids:
            result = self.nodes[rid].node_tick(now)
            if result.telemetry is not None:
                frame = result.telemetry
                self._telemetry_rows[rid].append([
                    frame.t, frame.robot_id,
                    frame.state.p[0], frame.state.p[1], frame.state.theta,
                    frame.state.v[0], frame.state.v[1], frame.state.omega,
                    *frame.wheel_speeds,
                    frame.battery_pct,
                    1 if frame.estop.latched else 0,
                    frame.estop.reason.value if frame.estop.reason else "",
                    frame.cpu_pct, frame.mem_pct,
                ])
        self.network.deliver()
        self.last_fresh_telemetry = self.supervisor.collect(now)
        self._log_phase(now)
        self._physics_phase()
        self.tick_index += 1
        return now

    def run(self) -> RunArtifacts:
        ticks = int(round(self.config.duration_s / self.control_dt))
        for _ in range(ticks):
            self.control_tick()
        return self.finalize()

    def finalize(self) -> RunArtifacts:
        out = self.out_dir
        (out / "robots").mkdir(parents=True, exist_ok=True)
        from .config import dump_config
        from .metrics import LOG_COLUMNS

        (out / "config.yaml").write_text(dump_config(self.config))

        for rid in self.robot_ids:
            with open(out / "robots" / f"robot_{rid}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(LOG_COLUMNS)
                writer.writerows(self._log_rows[rid])
            with open(out / "robots" / f"telemetry_{rid}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(TELEMETRY_COLUMNS)
                writer.writerows(self._telemetry_rows[rid])

        with open(out / "events.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "kind", "detail"])
            writer.writerows(self.events)

        goals = None
        if self.goals is not None:
            goals = {
                str(rid): [float(v) for v in self.goals[0, index]]
                for index, rid in enumerate(self.robot_ids)
            }
        duration = self.tick_index * self.control_dt
        manifest = {
            "schema": 1,
            "name": self.config.name,
            "seed": self.config.seed,
            "scenario": self.config.scenario.kind,
            "duration_s": round(duration, 9),
            "robot_ids": self.robot_ids,
            "goals": goals,
            "thresholds": self.config.thresholds.model_dump(mode="json"),
            "telemetry_rate_hz": self.config.telemetry_rate_hz,
            "wire_bytes": self.network.bytes_sent,
            "wire_bits_per_s": (self.network.bytes_sent * 8.0 / duration) if duration > 0 else 0.0,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

        metrics = write_metrics(out)
        return RunArtifacts(out_dir=out, metrics=metrics, passed=metrics["passed"])


def run_scenario(config: ScenarioConfig, out_dir: str | Path | None = None) -> RunArtifacts:
    return ScenarioRunner(config, out_dir=out_dir).run()


@dataclass(frozen=True)
class ReplayFrame:
    emit_at: float              # injected-time deadline, scaled by speed
    telemetry: dict


def replay_frames(run_dir: str | Path, speed: float = 1.0):
    """Re-emit recorded telemetry in timestamp order at a scaled pace.

    Yields ReplayFrame objects whose ``emit_at`` is recorded time divided
    by ``speed``; a 10 s recording at 2x finishes at 5 s of injected time.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    run_dir = Path(run_dir)
    robots_dir = run_dir / "robots"
    if not robots_dir.is_dir():
        raise FileNotFoundError(f"no robot logs under {run_dir}")
    frames = []
    for path in sorted(robots_dir.glob("telemetry_*.csv")):
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                frames.append((float(row["t"]), row))
    if not frames:
        raise FileNotFoundError(f"no telemetry rows under {robots_dir}")
    frames.sort(key=lambda item: (item[0], int(item[1]["robot_id"])))
    start = frames[0][0]
    for t, row in frames:
        yield ReplayFrame(emit_at=(t - start) / speed, telemetry=dict(row))
