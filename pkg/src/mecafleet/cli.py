"""Command-line harness.

Local verbs: run, replay, bench, validate-config, serve.
Client verbs (talk to a running gateway): roster, dispatch, estop, release.

Exit codes: 0 success / thresholds met, 1 threshold or determinism
failure, 2 configuration error.
"""

from __future__ import annotations

import filecmp
import json
import sys
import tempfile
from pathlib import Path

import click

from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2


def _parse_overrides(pairs: tuple[str, ...]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides[key] = value
    return overrides


@click.group()
def main():
    """Fleet scenario harness and gateway."""


@main.command()
@click.option("--config", "-c", "config_path", type=click.Path(), default=None,
              help="Scenario YAML; defaults apply when omitted.")
@click.option("--set", "-s", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Dotted-path config override, e.g. -s scenario.kind=swap_8")
@click.option("--out", "-o", "out_dir", type=click.Path(), default=None,
              help="Run directory (default: <outputs.dir>/<name>).")
@click.option("--check-determinism", is_flag=True,
              help="Run twice and fail unless artifacts are byte-identical.")
def run(config_path, overrides, out_dir, check_determinism):
    """Run a scenario to completion and write logs + metrics."""
    from .runner import run_scenario

    try:
        config = load_config(config_path, _parse_overrides(overrides))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    artifacts = run_scenario(config, out_dir=out_dir)
    fleet = artifacts.metrics["fleet"]
    click.echo(f"run complete: {artifacts.out_dir}")
    click.echo(
        "  peak_speed={:.3f} m/s  peak_accel={:.3f} m/s^2  collisions={}".format(
            fleet["peak_speed"], fleet["peak_accel"], fleet["collision_count"]
        )
    )
    if fleet["max_error"] is not None:
        click.echo(
            "  max_error={:.3f} m  mean_error={:.3f} m".format(
                fleet["max_error"], fleet["mean_error"]
            )
        )
    if fleet["goal_time_max"] is not None:
        click.echo(f"  goal_time_max={fleet['goal_time_max']:.2f} s")

    if check_determinism:
        with tempfile.TemporaryDirectory() as tmp:
            second = run_scenario(config, out_dir=Path(tmp) / "repeat")
            mismatches = _compare_runs(artifacts.out_dir, second.out_dir)
        if mismatches:
            click.echo(f"nondeterminism detected: {', '.join(mismatches)}", err=True)
            sys.exit(EXIT_THRESHOLD)
        click.echo("  determinism check: identical artifacts")

    for failure in artifacts.metrics["failures"]:
        click.echo(f"  threshold failure: {failure}", err=True)
    sys.exit(EXIT_OK if artifacts.passed else EXIT_THRESHOLD)


def _compare_runs(a: Path, b: Path) -> list[str]:
    mismatches = []
    for rel in ["metrics.json", "events.csv"]:
        if not filecmp.cmp(a / rel, b / rel, shallow=False):
            mismatches.append(rel)
    for path in sorted((a / "robots").glob("*.csv")):
        other = b / "robots" / path.name
        if not other.exists() or not filecmp.cmp(path, other, shallow=False):
            mismatches.append(f"robots/{path.name}")
    return mismatches


@main.command()
@click.argument("run_dir", type=click.Path(exists=True))
@click.option("--speed", type=float, default=1.0, help="Replay pace multiplier.")
@click.option("--recompute-metrics", is_flag=True, help="Recompute metrics and compare.")
def replay(run_dir, speed, recompute_metrics):
    """Re-emit recorded telemetry from a run directory (stdout JSON lines)."""
    from .metrics import compute_metrics
    from .runner import replay_frames

    try:
        count = 0
        last = 0.0
        for frame in replay_frames(run_dir, speed=speed):
            click.echo(json.dumps({"emit_at": frame.emit_at, **frame.telemetry}))
            count += 1
            last = frame.emit_at
        click.echo(f"replayed {count} frames over {last:.2f} s of injected time", err=True)
    except (FileNotFoundError, ValueError) as exc:
        click.echo(f"replay error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    if recompute_metrics:
        fresh = compute_metrics(run_dir)
        stored = json.loads((Path(run_dir) / "metrics.json").read_text())
        if fresh != stored:
            click.echo("metrics mismatch after replay", err=True)
            sys.exit(EXIT_THRESHOLD)
        click.echo("metrics recomputation: identical", err=True)


@main.command()
@click.option("--packets", "-n", type=int, default=100_000, show_default=True)
@click.option("--sizes", default="0,16,64,256,1024", show_default=True,
              help="Comma-separated payload sizes.")
@click.option("--floor", type=float, default=1e5, show_default=True,
              help="Minimum accepted encode+decode throughput, packets/s.")
def bench(packets, sizes, floor):
    """Measure codec throughput and fragmentation overhead."""
    from .bench import bench_protocol

    size_list = [int(s) for s in sizes.split(",") if s.strip() != ""] if sizes else []
    reports = bench_protocol(packets, size_list)
    if not reports:
        click.echo("empty report")
        sys.exit(EXIT_OK)
    click.echo(f"{'size':>6} {'enc pkt/s':>12} {'dec pkt/s':>12} {'enc MB/s':>10} {'dec MB/s':>10} {'overhead':>9}")
    slowest = float("inf")
    for r in reports:
        click.echo(
            f"{r.payload_size:>6} {r.encode_packets_per_s:>12.0f} {r.decode_packets_per_s:>12.0f}"
            f" {r.encode_mb_per_s:>10.2f} {r.decode_mb_per_s:>10.2f} {r.overhead_ratio:>9.4f}"
        )
        slowest = min(slowest, r.encode_packets_per_s, r.decode_packets_per_s)
    if slowest < floor:
        click.echo(f"throughput {slowest:.0f} pkt/s below floor {floor:.0f}", err=True)
        sys.exit(EXIT_THRESHOLD)


@main.command("validate-config")
@click.argument("config_path", type=click.Path())
def validate_config(config_path):
    """Validate a scenario config; exit 2 with field errors if invalid."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"ok: scenario={config.scenario.kind} robots={len(config.robots) or 'auto'}")


@main.command()
@click.option("--config", "-c", "config_path", type=click.Path(), default=None)
@click.option("--set", "-s", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="Default: network.gateway_port.")
@click.option("--pace", type=float, default=1.0, show_default=True,
              help="Simulation pace vs wall clock (0 = as fast as possible).")
@click.option("--replay-dir", type=click.Path(exists=True), default=None,
              help="Serve a recorded run instead of a live simulation.")
@click.option("--static-dir", type=click.Path(), default=None,
              help="Console bundle to serve at / (e.g. frontend/dist).")
def serve(config_path, overrides, host, port, pace, replay_dir, static_dir):
    """Start the fleet gateway (live sim or replay) for the console."""
    import uvicorn

    from .server import LiveFleet, create_app

    try:
        config = load_config(config_path, _parse_overrides(overrides))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    fleet = LiveFleet(config, pace=pace, replay_dir=replay_dir)
    fleet.start()
    app = create_app(fleet, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port or config.network.gateway_port, log_level="warning")
    finally:
        fleet.stop()


def _client(gateway):
    import httpx

    return httpx.Client(base_url=gateway, timeout=10.0)


@main.command()
@click.option("--gateway", default="http://127.0.0.1:8000", show_default=True)
def roster(gateway):
    """Show the roster of a running gateway."""
    with _client(gateway) as client:
        data = client.get("/api/v1/roster").json()
    for robot in data["robots"]:
        estop = "ESTOP" if robot["estop_latched"] else "ok"
        click.echo(
            f"robot {robot['robot_id']:>3}  {robot['connectivity']:>9}  {estop:>5}"
            f"  battery {robot['battery_pct']:.1f}%  pos ({robot['x']:.2f}, {robot['y']:.2f})"
        )


@main.command()
@click.option("--gateway", default="http://127.0.0.1:8000", show_default=True)
@click.option("--targets", required=True, help="Comma-separated robot ids.")
@click.option("--twist", default=None, help="vx,vy,omega")
@click.option("--circle", default=None, help="diameter,speed")
@click.option("--line", default=None, help="length,a_max,v_max")
@click.option("--idle", is_flag=True)
def dispatch(gateway, targets, twist, circle, line, idle):
    """Send a command to selected robots via the gateway."""
    target_ids = [int(t) for t in targets.split(",")]
    body = {"command": "ping", "targets": target_ids}
    if twist:
        vx, vy, omega = (float(v) for v in twist.split(","))
        body = {"command": "body_twist", "targets": target_ids,
                "twist": {"vx": vx, "vy": vy, "omega": omega}}
    elif circle:
        diameter, speed = (float(v) for v in circle.split(","))
        body = {"command": "set_trajectory", "targets": target_ids,
                "trajectory": {"kind": "circle", "diameter": diameter, "speed": speed}}
    elif line:
        length, a_max, v_max = (float(v) for v in line.split(","))
        body = {"command": "set_trajectory", "targets": target_ids,
                "trajectory": {"kind": "line", "length": length, "a_max": a_max, "v_max": v_max}}
    elif idle:
        body = {"command": "idle", "targets": target_ids}
    with _client(gateway) as client:
        data = client.post("/api/v1/dispatch", json=body).json()
    for status in data["statuses"]:
        click.echo(f"robot {status['robot_id']}: {status['status']}")


@main.command()
@click.option("--gateway", default="http://127.0.0.1:8000", show_default=True)
def estop(gateway):
    """Engage the fleet-wide emergency stop."""
    with _client(gateway) as client:
        data = client.post("/api/v1/estop", json={"action": "engage"}).json()
    click.echo(f"estop engaged: {len(data['statuses'])} robots signalled")


@main.command()
@click.option("--gateway", default="http://127.0.0.1:8000", show_default=True)
@click.option("--confirm", is_flag=True, help="Required; release is deliberate.")
def release(gateway, confirm):
    """Release the fleet-wide emergency stop (requires --confirm)."""
    with _client(gateway) as client:
        data = client.post(
            "/api/v1/estop", json={"action": "release", "confirm": confirm}
        ).json()
    if not data["applied"]:
        click.echo(data["detail"], err=True)
        sys.exit(EXIT_THRESHOLD)
    click.echo("estop released")


if __name__ == "__main__":
    main()
