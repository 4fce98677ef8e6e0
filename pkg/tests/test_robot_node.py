import itertools
import struct

import numpy as np
import pytest

from mecafleet.fleetnet import CommandChannel, CommandKind, EstopReason, SimNetwork
from mecafleet.fleetnet.commands import (
    BodyTwistCommand,
    EstopCommand,
    FleetCommand,
    PingCommand,
    SetTrajectoryCommand,
    TrajectorySpec,
    WheelSpeedsCommand,
    command_to_packet,
)
from mecafleet.kinematics import BodyTwist, WheelSpeeds, inverse_kinematics
from mecafleet.robot_node import (
    DriveMode,
    NodeConfig,
    RobotNode,
    SimAgentBackend,
    Telemetry,
)
from mecafleet.simworld import WorldBatch

ROBOT_ID = 16
OPERATOR = 1


def make_node(n_agents=1, agent=0, channel=None, **config_kwargs):
    world = WorldBatch.create(1, n_agents)
    backend = SimAgentBackend(world, agent_index=agent)
    node = RobotNode(NodeConfig(robot_id=ROBOT_ID, **config_kwargs), backend, channel)
    return node, backend, world


def cmd(kind, body, seq, t_sent=0.0):
    return FleetCommand(robot_id=ROBOT_ID, kind=kind, body=body, seq=seq, t_sent=t_sent)


ZERO = WheelSpeeds(0.0, 0.0, 0.0, 0.0)


class TestModes:
    def test_idle_zero_output(self):
        node, _, _ = make_node()
        result = node.node_tick(0.02)
        assert result.wheels == ZERO
        assert result.mode is DriveMode.IDLE

    def test_body_twist_passthrough(self):
        node, backend, _ = make_node()
        twist = BodyTwist(1.0, 0.0, 0.0)
        node.ingest_command(cmd(CommandKind.BODY_TWIST, BodyTwistCommand(twist), 1, 0.0), 0.0)
        result = node.node_tick(0.02)
        assert result.mode is DriveMode.BODY_TWIST
        expected = inverse_kinematics(twist, node.config.geometry)
        assert result.wheels == expected
        assert backend.commands_received == 1
        assert backend.last_command.vx == pytest.approx(1.0, abs=1e-5)

    def test_wheel_direct_saturated(self):
        node, _, _ = make_node()
        node.ingest_command(
            cmd(CommandKind.WHEEL_SPEEDS, WheelSpeedsCommand(WheelSpeeds(2000, 0, 0, 0)), 1, 0.0),
            0.0,
        )
        result = node.node_tick(0.02)
        assert result.mode is DriveMode.WHEEL_DIRECT
        assert result.wheels.fl == pytest.approx(1000.0)

    def test_stale_motion_command_discarded(self):
        node, _, _ = make_node()
        node.ingest_command(cmd(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), 1, 0.0), 0.0)
        assert node.node_tick(0.02).wheels != ZERO
        # no further commands; 0.3 s later the stored command is stale
        assert node.node_tick(0.3).wheels == ZERO

    def test_trajectory_mode_tracks_circle(self):
        node, backend, world = make_node()
        world.pos[0, 0] = [0.75, 0.0]
        spec = TrajectorySpec("circle", (1.5, 0.5, 0.0, 0.0))
        node.ingest_command(cmd(CommandKind.SET_TRAJECTORY, SetTrajectoryCommand(spec), 1, 0.0), 0.0)
        result = node.node_tick(0.02)
        assert result.mode is DriveMode.TRAJECTORY
        assert result.wheels != ZERO

    def test_unknown_command_counted(self):
        from mecafleet.canproto import TransportPacket

        node, _, _ = make_node()
        pkt = TransportPacket(source_id=OPERATOR, dest_id=ROBOT_ID, seq=1,
                              cmd_set=0x77, cmd_id=0x99, payload=b"")
        node.ingest_packet(pkt, 0.0)
        assert node.unknown_commands == 1
        assert node.mode is DriveMode.IDLE


class TestEstop:
    def test_estop_zeroes_same_tick(self):
        node, _, _ = make_node()
        node.ingest_command(cmd(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), 1, 0.0), 0.0)
        assert node.node_tick(0.02).wheels != ZERO
        node.ingest_command(cmd(CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), 2, 0.02), 0.02)
        result = node.node_tick(0.04)  # first tick after engage: already zero
        assert result.wheels == ZERO
        assert node.latch.latched

    def test_estop_in_trajectory_mode(self):
        node, _, world = make_node()
        world.pos[0, 0] = [0.75, 0.0]
        spec = TrajectorySpec("circle", (1.5, 0.5, 0.0, 0.0))
        node.ingest_command(cmd(CommandKind.SET_TRAJECTORY, SetTrajectoryCommand(spec), 1, 0.0), 0.0)
        node.node_tick(0.02)
        node.ingest_command(cmd(CommandKind.ESTOP, EstopCommand(EstopReason.BUTTON), 2, 0.02), 0.02)
        assert node.node_tick(0.04).wheels == ZERO

    def test_release_restores_output(self):
        node, _, _ = make_node()
        node.ingest_command(cmd(CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), 1, 0.0), 0.0)
        node.node_tick(0.02)
        node.ingest_command(cmd(CommandKind.ESTOP_RELEASE, PingCommand(), 2, 0.02), 0.02)
        node.ingest_command(
            cmd(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), 3, 0.03), 0.03
        )
        assert node.node_tick(0.04).wheels != ZERO
        assert not node.latch.latched

    def test_exhaustive_interleavings_estop_dominates(self):
        """Every event trace up to length 5 (and sampled length-8 traces):
        after an engage, every tick's output is zero until a release."""
        events = ("twist", "estop", "release", "tick")

        def run_trace(trace):
            node, _, _ = make_node()
            now = 0.0
            seq = 1
            engaged = False
            for event in trace:
                now += 0.02
                if event == "twist":
                    node.ingest_command(
                        cmd(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), seq, now),
                        now,
                    )
                    seq += 1
                elif event == "estop":
                    node.ingest_command(
                        cmd(CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), seq, now), now
                    )
                    seq += 1
                    engaged = True
                elif event == "release":
                    node.ingest_command(cmd(CommandKind.ESTOP_RELEASE, PingCommand(), seq, now), now)
                    seq += 1
                    engaged = False
                else:
                    result = node.node_tick(now)
                    if engaged:
                        assert result.wheels == ZERO, f"nonzero output latched, trace={trace}"

        for n in range(1, 6):
            for trace in itertools.product(events, repeat=n):
                run_trace(trace)
        # full-length traces, deterministically subsampled
        all_8 = list(itertools.product(events, repeat=8))
        for trace in all_8[:: 7]:
            run_trace(trace)

    def test_estop_latency_one_control_tick(self):
        net = SimNetwork()
        op = CommandChannel(net.socket(OPERATOR), OPERATOR)
        node_channel = CommandChannel(net.socket(ROBOT_ID), ROBOT_ID)
        node, _, _ = make_node(channel=node_channel)
        op.send_command(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), ROBOT_ID, now=0.0)
        net.deliver()
        assert node.node_tick(0.02).wheels != ZERO
        op.send_command(CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), ROBOT_ID, now=0.03)
        net.deliver()
        result = node.node_tick(0.04)  # <= one control period after engage
        assert result.wheels == ZERO


class TestBackendFailure:
    def test_five_failures_latch_internal_estop(self):
        node, backend, _ = make_node()

        def broken(now):
            raise RuntimeError("bus gone")

        backend.observe = broken
        for i in range(5):
            node.node_tick(0.02 * (i + 1))
        assert node.latch.latched
        assert node.latch.state.reason is EstopReason.INTERNAL

    def test_recovery_resets_counter(self):
        node, backend, _ = make_node()
        original = backend.observe
        calls = {"n": 0}

        def flaky(now):
            calls["n"] += 1
            if calls["n"] % 2 == 0:
                raise RuntimeError("flaky")
            return original(now)

        backend.observe = flaky
        for i in range(12):
            node.node_tick(0.02 * (i + 1))
        assert not node.latch.latched


class TestTelemetry:
    def test_published_on_schedule(self):
        node, _, _ = make_node()
        emitted = []
        t = 0.0
        for i in range(1, 51):  # 1 s at 50 Hz control
            t = 0.02 * i
            result = node.node_tick(t)
            if result.telemetry is not None:
                emitted.append(result.telemetry.t)
        assert len(emitted) == 10  # 10 Hz for 1 s

    def test_telemetry_period_jitter_under_10pct(self):
        node, _, _ = make_node()
        stamps = []
        for i in range(1, 151):  # 3 s of control ticks
            result = node.node_tick(0.02 * i)
            if result.telemetry is not None:
                stamps.append(result.telemetry.t)
        intervals = [b - a for a, b in zip(stamps, stamps[1:])]
        nominal = 0.1
        assert intervals
        assert all(abs(iv - nominal) <= 0.1 * nominal for iv in intervals)

    def test_telemetry_reports_estop(self):
        node, _, _ = make_node()
        node.ingest_command(cmd(CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), 1, 0.0), 0.0)
        telemetry = None
        for i in range(1, 8):
            result = node.node_tick(0.02 * i)
            if result.telemetry:
                telemetry = result.telemetry
                break
        assert telemetry is not None
        assert telemetry.estop.latched
        assert telemetry.estop.reason is EstopReason.OPERATOR

    def test_wire_roundtrip(self):
        node, _, _ = make_node()
        node.node_tick(0.02)
        telemetry = node.build_telemetry(WheelSpeeds(10, -10, 5, -5), 0.1)
        back = Telemetry.unpack(telemetry.pack())
        assert back.robot_id == ROBOT_ID
        assert back.battery_pct == pytest.approx(telemetry.battery_pct, abs=1e-4)
        assert back.wheel_speeds.fl == pytest.approx(10.0)
        assert back.state.p[0] == pytest.approx(telemetry.state.p[0], abs=1e-5)
        assert back.estop.latched == telemetry.estop.latched

    def test_battery_drains_with_effort(self):
        node, backend, world = make_node()
        from mecafleet.simworld import step

        node.ingest_command(
            cmd(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(2.0, 0, 0)), 1, 0.0), 0.0
        )
        assert backend.battery_pct() == pytest.approx(100.0)
        for i in range(1, 101):
            now = 0.02 * i
            node._twist_cmd = (BodyTwist(2.0, 0, 0), now)  # keep command fresh
            node.node_tick(now)
            twist = backend.last_command
            v_world = np.array([[np.cos(0.0) * twist.vx, twist.vy]])
            step(world, v_world[None])
            step(world, v_world[None])
        assert backend.battery_pct() < 100.0
        assert backend.battery_pct() > 99.0  # gentle drive barely dents the pack


class TestDeterminism:
    def test_identical_traces_identical_outputs(self):
        def run():
            node, backend, world = make_node()
            outputs = []
            node.ingest_command(
                cmd(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1.0, 0.5, 0.2)), 1, 0.0), 0.0
            )
            from mecafleet.simworld import step

            for i in range(1, 26):
                now = 0.02 * i
                node._twist_cmd = (BodyTwist(1.0, 0.5, 0.2), now)
                result = node.node_tick(now)
                outputs.append(tuple(result.wheels))
                twist = backend.last_command
                theta = world.theta[0, 0]
                v_world = np.array(
                    [
                        np.cos(theta) * twist.vx - np.sin(theta) * twist.vy,
                        np.sin(theta) * twist.vx + np.cos(theta) * twist.vy,
                    ]
                )
                step(world, v_world[None, None], omega_ref=np.array([[twist.omega]]))
                step(world, v_world[None, None], omega_ref=np.array([[twist.omega]]))
            return outputs

        assert run() == run()
