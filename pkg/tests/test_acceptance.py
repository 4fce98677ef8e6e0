"""Acceptance gate: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with ``pytest -s`` or in the
captured output of a failing run).
"""

import itertools
import math
import random
import time

import numpy as np
import pytest

from mecafleet.canproto import StreamDecoder, TransportPacket, decode_stream, encode_packet, fragment
from mecafleet.config import load_config
from mecafleet.control.dare import dare_residual, solve_dare
from mecafleet.fleetnet import CommandChannel, CommandKind, EstopReason, SimNetwork
from mecafleet.fleetnet.commands import (
    BodyTwistCommand,
    EstopCommand,
    FleetCommand,
    PingCommand,
    WheelSpeedsCommand,
)
from mecafleet.kinematics import BodyTwist, WheelSpeeds, forward_kinematics
from mecafleet.robot_node import NodeConfig, RobotNode, SimAgentBackend
from mecafleet.runner import run_scenario
from mecafleet.simworld import WorldBatch, step
from tests.conftest import random_packet

ZERO = WheelSpeeds(0.0, 0.0, 0.0, 0.0)


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


class TestMaxSpeedFormula:
    def test_forward_kinematics_at_wheel_limit(self):
        twist = forward_kinematics(WheelSpeeds(1000.0, 1000.0, 1000.0, 1000.0))
        ok = abs(twist.vx - 5.236) <= 0.01 and abs(twist.vy) < 1e-9 and abs(twist.omega) < 1e-9
        report("max-speed-formula", ok, f"vx={twist.vx:.4f} m/s")


class TestLineTracking:
    def test_line_envelope(self, tmp_path):
        config = load_config(overrides={
            "name": "accept-line", "scenario.kind": "line_track", "duration_s": 6.0,
            "scenario.line.length": 5.0, "scenario.line.a_max": 5.0, "scenario.line.v_max": 4.45,
        })
        t0 = time.perf_counter()
        artifacts = run_scenario(config, out_dir=tmp_path / "line")
        runtime = time.perf_counter() - t0
        fleet = artifacts.metrics["fleet"]
        ok = (
            4.4 <= fleet["peak_speed"] <= 5.24
            and fleet["max_error"] is not None
            and fleet["max_error"] <= 0.5
            and runtime < 10.0
        )
        report(
            "line-tracking", ok,
            f"peak={fleet['peak_speed']:.3f} m/s, max_err={fleet['max_error']:.3f} m, "
            f"runtime={runtime:.1f}s",
        )


class TestCircleTracking:
    def test_circle_mean_error(self, tmp_path):
        config = load_config(overrides={
            "name": "accept-circle", "scenario.kind": "circle_track", "duration_s": 8.0,
            "scenario.circle.diameter": 1.5, "scenario.circle.speed": 1.7,
        })
        t0 = time.perf_counter()
        artifacts = run_scenario(config, out_dir=tmp_path / "circle")
        runtime = time.perf_counter() - t0
        fleet = artifacts.metrics["fleet"]
        ok = fleet["mean_error"] is not None and fleet["mean_error"] <= 0.15 and runtime < 10.0
        report(
            "circle-tracking", ok,
            f"mean_err={fleet['mean_error']:.3f} m at 1.7 m/s, runtime={runtime:.1f}s",
        )


class TestSwapScenario:
    def test_swap_collision_free_and_deterministic(self, tmp_path):
        overrides = {
            "name": "accept-swap", "scenario.kind": "swap_8", "duration_s": 12.0,
            "seed": 42, "thresholds.goal_tolerance": 0.1,
        }
        t0 = time.perf_counter()
        first = run_scenario(load_config(overrides=overrides), out_dir=tmp_path / "a")
        runtime = time.perf_counter() - t0
        second = run_scenario(load_config(overrides=overrides), out_dir=tmp_path / "b")

        fleet = first.metrics["fleet"]
        identical = (first.out_dir / "metrics.json").read_bytes() == (
            second.out_dir / "metrics.json"
        ).read_bytes()
        ok = (
            fleet["collision_count"] == 0
            and fleet["goals_all_reached"]
            and fleet["goal_time_max"] < 30.0
            and identical
            and runtime < 30.0
        )
        report(
            "swap-8", ok,
            f"goal_time={fleet['goal_time_max']}s, collisions={fleet['collision_count']}, "
            f"deterministic={identical}, runtime={runtime:.1f}s",
        )


class TestProtocolSuite:
    def test_roundtrip_10k(self):
        rng = random.Random(20240601)
        failures = 0
        for _ in range(10_000):
            packet = random_packet(rng, max_payload=256)
            decoded, _ = decode_stream(encode_packet(packet))
            if decoded != [packet]:
                failures += 1
        report("protocol-roundtrip-10k", failures == 0, f"{failures} failures")

    def test_resync_recovers_all_intact_packets(self):
        rng = random.Random(77)
        packets = [random_packet(rng, 128) for _ in range(500)]
        stream = bytearray()
        for packet in packets:
            stream += rng.randbytes(rng.randint(0, 64))
            stream += encode_packet(packet)
        stream += rng.randbytes(64)
        decoder = StreamDecoder()
        got = decoder.feed(bytes(stream))
        got += decoder.flush()
        ok = got == packets
        report("protocol-resync", ok, f"{len(got)}/{len(packets)} packets recovered")

    def test_fuzz_decoder_1e6_inputs(self):
        rng = np.random.default_rng(8181)
        decoder = StreamDecoder()
        t0 = time.perf_counter()
        blob = rng.integers(0, 256, size=4_000_000, dtype=np.uint8).tobytes()
        lengths = rng.integers(0, 40, size=1_000_000)
        offsets = np.concatenate([[0], np.cumsum(lengths)]) % (len(blob) - 64)
        survived = 0
        for i in range(1_000_000):
            start = int(offsets[i])
            decoder.feed(blob[start : start + int(lengths[i])])
            survived += 1
            if len(decoder._buf) > 4096:
                decoder.flush()
        decoder.flush()
        runtime = time.perf_counter() - t0
        ok = survived == 1_000_000 and runtime < 120.0
        report("protocol-fuzz-1e6", ok, f"{survived} inputs, {runtime:.1f}s")

    def test_fragmentation_identity_all_sizes(self):
        decoder = StreamDecoder()
        ok = True
        for size in range(0, 1025):
            packet = TransportPacket(
                source_id=size % 256, dest_id=(size * 7) % 256, seq=size % 65536,
                cmd_set=1, cmd_id=2, payload=bytes(size % 256 for _ in range(size)),
            )
            got = []
            for frame in fragment(packet, 0x55 % 0x7FF):
                got += decoder.feed(frame.data)
            if got != [packet]:
                ok = False
                break
        report("protocol-fragmentation-identity", ok, "payload sizes 0..1024")


class TestDareSolver:
    def test_scalar_closed_form(self):
        p, k = solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]])
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        ok = abs(p[0, 0] - golden) < 1e-9
        report("dare-scalar", ok, f"P={p[0, 0]:.12f} vs (1+sqrt(5))/2")

    def test_1000_random_systems(self):
        rng = np.random.default_rng(1337)
        t0 = time.perf_counter()
        solved = 0
        worst_rho = 0.0
        worst_residual = 0.0
        while solved < 1000:
            ad = rng.normal(0.0, 0.5, (4, 4))
            bd = rng.normal(0.0, 1.0, (4, 2))
            ctrb = np.hstack([np.linalg.matrix_power(ad, i) @ bd for i in range(4)])
            if np.linalg.matrix_rank(ctrb) < 4:
                continue
            c = rng.normal(0.0, 1.0, (4, 4))
            q = c.T @ c
            r = np.eye(2) + np.diag(rng.uniform(0.0, 1.0, 2))
            p, k = solve_dare(ad, bd, q, r)
            rho = float(np.max(np.abs(np.linalg.eigvals(ad - bd @ k))))
            residual = dare_residual(ad, bd, q, r, p)
            worst_rho = max(worst_rho, rho)
            worst_residual = max(worst_residual, residual)
            solved += 1
        runtime = time.perf_counter() - t0
        ok = worst_rho < 1.0 and worst_residual < 1e-8 and runtime < 60.0
        report(
            "dare-1000-random", ok,
            f"max rho={worst_rho:.6f}, max residual={worst_residual:.2e}, {runtime:.1f}s",
        )


def _make_node():
    world = WorldBatch.create(1, 1)
    backend = SimAgentBackend(world, agent_index=0)
    return RobotNode(NodeConfig(robot_id=16), backend), world


def _command(kind, body, seq, t):
    return FleetCommand(robot_id=16, kind=kind, body=body, seq=seq, t_sent=t)


class TestEstopDominance:
    def test_exhaustive_interleavings(self):
        """All traces up to 8 events over {motion, engage, tick}, plus all
        traces up to 6 events with release in the alphabet."""
        t0 = time.perf_counter()
        checked = 0

        def run_trace(trace):
            nonlocal checked
            node, _ = _make_node()
            now, seq, engaged = 0.0, 1, False
            for event in trace:
                now += 0.02
                if event == "motion":
                    node.ingest_command(
                        _command(CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), seq, now),
                        now,
                    )
                    seq += 1
                elif event == "engage":
                    node.ingest_command(
                        _command(CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), seq, now), now
                    )
                    seq += 1
                    engaged = True
                elif event == "release":
                    node.ingest_command(
                        _command(CommandKind.ESTOP_RELEASE, PingCommand(), seq, now), now
                    )
                    seq += 1
                    engaged = False
                else:
                    result = node.node_tick(now)
                    if engaged:
                        assert result.wheels == ZERO, f"output after engage, trace={trace}"
            checked += 1

        for n in range(1, 9):
            for trace in itertools.product(("motion", "engage", "tick"), repeat=n):
                run_trace(trace)
        for n in range(1, 7):
            for trace in itertools.product(("motion", "engage", "release", "tick"), repeat=n):
                run_trace(trace)
        runtime = time.perf_counter() - t0
        report("estop-dominance", True, f"{checked} traces, {runtime:.1f}s")

    def test_estop_to_zero_latency_one_tick(self):
        net = SimNetwork()
        operator = CommandChannel(net.socket(1), 1)
        node_channel = CommandChannel(net.socket(16), 16)
        world = WorldBatch.create(1, 1)
        node = RobotNode(NodeConfig(robot_id=16), SimAgentBackend(world, 0), node_channel)

        operator.send_command(
            CommandKind.BODY_TWIST, BodyTwistCommand(BodyTwist(1, 0, 0)), 16, now=0.0
        )
        net.deliver()
        moving = node.node_tick(0.02)
        operator.send_command(
            CommandKind.ESTOP, EstopCommand(EstopReason.OPERATOR), 16, now=0.03
        )
        net.deliver()
        stopped = node.node_tick(0.04)  # exactly one control tick later
        ok = moving.wheels != ZERO and stopped.wheels == ZERO
        report("estop-latency", ok, "zero output one control tick (20 ms) after engage")


class TestBandwidth:
    def test_five_robots_50hz_under_1mbps(self):
        net = SimNetwork()
        operator = CommandChannel(net.socket(1), 1)
        channels = [CommandChannel(net.socket(16 + i), 16 + i) for i in range(5)]
        wheels = WheelSpeedsCommand(WheelSpeeds(800.0, -800.0, 800.0, -800.0))
        seconds = 2.0
        ticks = int(seconds / 0.02)
        for tick in range(ticks):
            now = tick * 0.02
            for i in range(5):
                operator.send_command(CommandKind.WHEEL_SPEEDS, wheels, 16 + i, now=now)
            net.deliver()
            for channel in channels:
                channel.poll(now=now)
        bits_per_s = net.bytes_sent * 8 / seconds
        ok = bits_per_s <= 1_000_000
        report("bandwidth-5x50hz", ok, f"measured {bits_per_s / 1000:.1f} kb/s <= 1 Mb/s")


class TestBatchEquivalence:
    def test_64_envs_1000_steps_bitwise(self):
        rng = np.random.default_rng(2)
        n_envs, n_agents, steps = 64, 4, 1000
        starts = rng.uniform(-2.0, 2.0, (n_agents, 2))
        batch = WorldBatch.create(n_envs, n_agents)
        batch.pos[:] = starts
        singles = [batch.env_slice(e) for e in range(n_envs)]

        v_refs = rng.uniform(-1.5, 1.5, (steps, n_agents, 2))
        t0 = time.perf_counter()
        for s in range(steps):
            step(batch, np.broadcast_to(v_refs[s], (n_envs, n_agents, 2)).copy())
        for single in singles:
            for s in range(steps):
                step(single, v_refs[s][None])
        runtime = time.perf_counter() - t0

        ok = True
        for e, single in enumerate(singles):
            if not (
                np.array_equal(batch.pos[e], single.pos[0])
                and np.array_equal(batch.vel[e], single.vel[0])
            ):
                ok = False
                break
        report("batch-equivalence", ok, f"64 envs x {steps} steps bitwise, {runtime:.1f}s")
