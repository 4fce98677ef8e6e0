"""Live fleet session: the scenario runner on a paced background thread.

The gateway talks to this object only; it owns the runner, injects
operator commands at tick boundaries, and fans telemetry out to
subscriber queues (one bounded queue per websocket client).
"""

from __future__ import annotations

import math
import queue
import threading
import time
from pathlib import Path

from ..config import ScenarioConfig
from ..fleetnet import CommandKind, EstopReason
from ..fleetnet.commands import (
    BodyTwistCommand,
    EstopCommand,
    PingCommand,
    SetTrajectoryCommand,
    TrajectorySpec,
)
from ..kinematics import BodyTwist
from ..robot_node import Telemetry
from ..runner import DispatchRecord, ReplayFrame, ScenarioRunner, replay_frames
from .models import RosterRobot, TelemetryFrame


def telemetry_to_frame(telemetry: Telemetry) -> TelemetryFrame:
    return TelemetryFrame(
        robot_id=telemetry.robot_id,
        t=telemetry.t,
        x=float(telemetry.state.p[0]),
        y=float(telemetry.state.p[1]),
        theta=telemetry.state.theta,
        vx=float(telemetry.state.v[0]),
        vy=float(telemetry.state.v[1]),
        omega=telemetry.state.omega,
        wheels=tuple(telemetry.wheel_speeds),
        battery_pct=telemetry.battery_pct,
        estop_latched=telemetry.estop.latched,
        estop_reason=telemetry.estop.reason.value if telemetry.estop.reason else None,
        cpu_pct=telemetry.cpu_pct,
        mem_pct=telemetry.mem_pct,
    )


def replay_row_to_frame(row: dict) -> TelemetryFrame:
    return TelemetryFrame(
        robot_id=int(row["robot_id"]),
        t=float(row["t"]),
        x=float(row["x"]),
        y=float(row["y"]),
        theta=float(row["theta"]),
        vx=float(row["vx"]),
        vy=float(row["vy"]),
        omega=float(row["omega"]),
        wheels=(float(row["fl"]), float(row["fr"]), float(row["rl"]), float(row["rr"])),
        battery_pct=float(row["battery_pct"]),
        estop_latched=row["latched"] in ("1", "True", "true"),
        estop_reason=row["reason"] or None,
        cpu_pct=float(row["cpu_pct"]),
        mem_pct=float(row["mem_pct"]),
    )


class LiveFleet:
    """One live session, either a paced simulation or a log replay."""

    def __init__(
        self,
        config: ScenarioConfig,
        out_dir: str | Path | None = None,
        pace: float = 1.0,
        replay_dir: str | Path | None = None,
        replay_speed: float = 1.0,
    ):
        self.config = config
        self.pace = pace
        self.mode = "replay" if replay_dir is not None else "sim"
        self.replay_dir = replay_dir
        self.replay_speed = replay_speed
        self.runner: ScenarioRunner | None = None
        if self.mode == "sim":
            self.runner = ScenarioRunner(config, out_dir=out_dir)
        self._subscribers: list[queue.Queue] = []
        self._subscribers_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._telemetry_cursor = 0
        self._replay_roster: dict[int, TelemetryFrame] = {}
        self.sim_time = 0.0

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        target = self._run_sim if self.mode == "sim" else self._run_replay
        self._thread = threading.Thread(target=target, name="live-fleet", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive() and not self._stop.is_set()

    # -- subscriber fan-out -----------------------------------------------------

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=512)
        with self._subscribers_lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._subscribers_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, kind: str, data: dict) -> None:
        with self._subscribers_lock:
            targets = list(self._subscribers)
        for q in targets:
            try:
                q.put_nowait({"v": 1, "type": kind, "data": data})
            except queue.Full:
                pass    # slow client: drop rather than stall the loop

    # -- sim loop ---------------------------------------------------------------

    def _run_sim(self) -> None:
        runner = self.runner
        wall_start = time.monotonic()
        roster_every = max(1, int(0.5 / runner.control_dt))
        while not self._stop.is_set():
            now = runner.control_tick()
            self.sim_time = now
            for telemetry in getattr(runner, "last_fresh_telemetry", []):
                self._publish("telemetry", telemetry_to_frame(telemetry).model_dump())
            if runner.tick_index % roster_every == 0:
                self._publish("roster", self.roster().model_dump())
                self._trim_logs(runner)
            if self.pace > 0:
                target_wall = wall_start + (now + runner.control_dt) / self.pace
                delay = target_wall - time.monotonic()
                if delay > 0:
                    self._stop.wait(delay)

    @staticmethod
    def _trim_logs(runner: ScenarioRunner, keep: int = 30_000) -> None:
        # a live session never finalizes; cap in-memory log growth
        for rows in runner._log_rows.values():
            if len(rows) > keep:
                del rows[: len(rows) - keep]
        for rows in runner._telemetry_rows.values():
            if len(rows) > keep:
                del rows[: len(rows) - keep]

    def _run_replay(self) -> None:
        wall_start = time.monotonic()
        for frame in replay_frames(self.replay_dir, speed=self.replay_speed):
            if self._stop.is_set():
                return
            delay = wall_start + frame.emit_at - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
            model = replay_row_to_frame(frame.telemetry)
            self.sim_time = model.t
            self._replay_roster[model.robot_id] = model
            self._publish("telemetry", model.model_dump())

    # -- operator surface ---------------------------------------------------------

    def roster(self):
        from .models import RosterResponse

        now = self.sim_time
        robots = []
        if self.mode == "sim":
            runner = self.runner
            goals = runner.goals
            for index, rid in enumerate(runner.robot_ids):
                entry = runner.supervisor.roster.get(rid)
                telemetry = entry.last_telemetry if entry else None
                goal = None
                if goals is not None:
                    goal = (float(goals[0, index, 0]), float(goals[0, index, 1]))
                robots.append(
                    RosterRobot(
                        robot_id=rid,
                        connectivity=entry.connectivity(now).value if entry else "lost",
                        estop_latched=telemetry.estop.latched if telemetry else False,
                        estop_reason=(
                            telemetry.estop.reason.value
                            if telemetry and telemetry.estop.reason
                            else None
                        ),
                        battery_pct=telemetry.battery_pct if telemetry else 100.0,
                        x=float(telemetry.state.p[0]) if telemetry else float(runner.world.pos[0, index, 0]),
                        y=float(telemetry.state.p[1]) if telemetry else float(runner.world.pos[0, index, 1]),
                        theta=telemetry.state.theta if telemetry else 0.0,
                        goal=goal,
                        last_seen=entry.last_seen if entry else 0.0,
                    )
                )
        else:
            for rid, frame in sorted(self._replay_roster.items()):
                age = now - frame.t
                connectivity = "connected" if age <= 0.15 else ("degraded" if age <= 0.5 else "lost")
                robots.append(
                    RosterRobot(
                        robot_id=rid, connectivity=connectivity,
                        estop_latched=frame.estop_latched, estop_reason=frame.estop_reason,
                        battery_pct=frame.battery_pct,
                        x=frame.x, y=frame.y, theta=frame.theta,
                        last_seen=frame.t,
                    )
                )
        return RosterResponse(
            v=1, t=now, scenario=self.config.scenario.kind, running=self.running, robots=robots
        )

    def _await_records(self, records: list[DispatchRecord], timeout: float) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if all(r.status != "pending" for r in records):
                return
            time.sleep(0.01)

    def _inject_dispatch(self, kind: CommandKind, body, targets: list[int],
                         ack_timeout: float) -> list[DispatchRecord]:
        if self.mode != "sim":
            raise RuntimeError("dispatch requires a live simulation session")
        done = threading.Event()
        records: list[DispatchRecord] = []

        def action(supervisor, now):
            records.extend(
                supervisor.dispatch(kind, body, targets, now, ack_timeout=ack_timeout)
            )
            done.set()

        self.runner.inject(action)
        done.wait(timeout=5.0)
        return records

    def dispatch(self, kind: CommandKind, body, targets: list[int],
                 ack_timeout: float = 1.0, wait: bool = True) -> list[DispatchRecord]:
        records = self._inject_dispatch(kind, body, targets, ack_timeout)
        if wait:
            # waits in wall time: at pace 1 the 1 s ack deadline is 1 s of wall;
            # pace 0 (unpaced) burns through sim time almost instantly
            scale = self.pace if self.pace > 0 else 1.0
            self._await_records(records, timeout=ack_timeout / scale + 1.0)
        return records

    def dispatch_twist(self, twist: BodyTwist, targets: list[int]) -> list[DispatchRecord]:
        return self.dispatch(CommandKind.BODY_TWIST, BodyTwistCommand(twist), targets)

    def dispatch_trajectory(self, spec: TrajectorySpec, targets: list[int]) -> list[DispatchRecord]:
        return self.dispatch(CommandKind.SET_TRAJECTORY, SetTrajectoryCommand(spec), targets)

    def dispatch_ping(self, targets: list[int]) -> list[DispatchRecord]:
        return self.dispatch(CommandKind.PING, PingCommand(), targets)

    def estop_all(self) -> list[DispatchRecord]:
        return self.dispatch(
            CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR),
            list(self.runner.robot_ids),
        )

    def release_all(self) -> list[DispatchRecord]:
        return self.dispatch(
            CommandKind.ESTOP_RELEASE, PingCommand(), list(self.runner.robot_ids)
        )
