"""Run metrics as pure functions of the log files.

Definitions: peak speed is max ||v|| over samples; peak acceleration is
max ||dv||/dt over consecutive samples; tracking error is ||p - p_ref||
at matched timestamps; a goal counts as reached at the first time after
which the robot never leaves the tolerance ball.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

LOG_COLUMNS = [
    "t", "x", "y", "theta", "vx", "vy",
    "x_ref", "y_ref", "vx_ref", "vy_ref", "err",
]


def load_robot_log(path: str | Path) -> dict[str, np.ndarray]:
    rows: dict[str, list[float]] = {name: [] for name in LOG_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            for name in LOG_COLUMNS:
                value = row.get(name, "")
                rows[name].append(float(value) if value not in ("", None) else math.nan)
    return {name: np.asarray(values) for name, values in rows.items()}


def robot_metrics(log: dict[str, np.ndarray]) -> dict:
    t = log["t"]
    speed = np.hypot(log["vx"], log["vy"])
    out = {
        "peak_speed": float(np.max(speed)) if speed.size else 0.0,
        "peak_accel": 0.0,
        "max_error": None,
        "mean_error": None,
    }
    if t.size >= 2:
        dv = np.hypot(np.diff(log["vx"]), np.diff(log["vy"]))
        dt = np.diff(t)
        with np.errstate(invalid="ignore", divide="ignore"):
            accel = np.where(dt > 0, dv / dt, 0.0)
        out["peak_accel"] = float(np.max(accel))
    err = log["err"]
    tracked = err[~np.isnan(err)]
    if tracked.size:
        out["max_error"] = float(np.max(tracked))
        out["mean_error"] = float(np.mean(tracked))
    return out


def goal_reach_time(log: dict[str, np.ndarray], goal: tuple[float, float], tolerance: float) -> float | None:
    """First time after which the robot stays within tolerance of the goal."""
    dist = np.hypot(log["x"] - goal[0], log["y"] - goal[1])
    outside = dist > tolerance
    if outside.all():
        return None
    if not outside.any():
        return float(log["t"][0])
    last_outside = int(np.max(np.nonzero(outside)[0]))
    if last_outside + 1 >= dist.size:
        return None
    return float(log["t"][last_outside + 1])


def load_events(path: str | Path) -> list[dict]:
    events = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            events.append(row)
    return events


def compute_metrics(run_dir: str | Path) -> dict:
    """Aggregate metrics for a finished run directory.

    Reads manifest.json, robots/robot_<id>.csv, and events.csv; returns
    the metrics document (also what metrics.json stores).
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"not a run directory (missing manifest.json): {run_dir}")
    manifest = json.loads(manifest_path.read_text())

    per_robot: dict[str, dict] = {}
    goals = manifest.get("goals") or {}
    tolerance = manifest["thresholds"].get("goal_tolerance", 0.1)
    for robot_id in manifest["robot_ids"]:
        log_path = run_dir / "robots" / f"robot_{robot_id}.csv"
        log = load_robot_log(log_path)
        entry = robot_metrics(log)
        goal = goals.get(str(robot_id))
        if goal is not None:
            entry["goal_time"] = goal_reach_time(log, tuple(goal), tolerance)
        per_robot[str(robot_id)] = entry

    events = load_events(run_dir / "events.csv") if (run_dir / "events.csv").exists() else []
    collision_count = sum(1 for e in events if e["kind"] == "collision")

    errors_max = [m["max_error"] for m in per_robot.values() if m["max_error"] is not None]
    errors_mean = [m["mean_error"] for m in per_robot.values() if m["mean_error"] is not None]
    goal_times = [m.get("goal_time") for m in per_robot.values() if "goal_time" in m]

    fleet = {
        "peak_speed": max((m["peak_speed"] for m in per_robot.values()), default=0.0),
        "peak_accel": max((m["peak_accel"] for m in per_robot.values()), default=0.0),
        "max_error": max(errors_max) if errors_max else None,
        "mean_error": float(np.mean(errors_mean)) if errors_mean else None,
        "collision_count": collision_count,
        "goal_time_max": (None if any(t is None for t in goal_times) else max(goal_times))
        if goal_times
        else None,
        "goals_all_reached": bool(goal_times) and all(t is not None for t in goal_times),
        "wire_bytes": manifest.get("wire_bytes", 0),
        "wire_bits_per_s": manifest.get("wire_bits_per_s", 0.0),
    }

    passed, failures = check_thresholds(fleet, manifest["thresholds"], has_goals=bool(goals))
    return {
        "schema": 1,
        "name": manifest["name"],
        "seed": manifest["seed"],
        "duration_s": manifest["duration_s"],
        "scenario": manifest["scenario"],
        "per_robot": per_robot,
        "fleet": fleet,
        "thresholds": manifest["thresholds"],
        "passed": passed,
        "failures": failures,
    }


def check_thresholds(fleet: dict, thresholds: dict, has_goals: bool) -> tuple[bool, list[str]]:
    failures = []
    peak_min = thresholds.get("peak_speed_min")
    if peak_min is not None and fleet["peak_speed"] < peak_min:
        failures.append(f"peak_speed {fleet['peak_speed']:.3f} < {peak_min}")
    max_err = thresholds.get("max_error_max")
    if max_err is not None and (fleet["max_error"] is None or fleet["max_error"] > max_err):
        failures.append(f"max_error {fleet['max_error']} > {max_err}")
    mean_err = thresholds.get("mean_error_max")
    if mean_err is not None and (fleet["mean_error"] is None or fleet["mean_error"] > mean_err):
        failures.append(f"mean_error {fleet['mean_error']} > {mean_err}")
    coll_max = thresholds.get("collisions_max")
    if coll_max is not None and fleet["collision_count"] > coll_max:
        failures.append(f"collision_count {fleet['collision_count']} > {coll_max}")
    goal_max = thresholds.get("goal_time_max")
    if goal_max is not None:
        if not has_goals or not fleet["goals_all_reached"]:
            failures.append("not all goals reached")
        elif fleet["goal_time_max"] > goal_max:
            failures.append(f"goal_time_max {fleet['goal_time_max']} > {goal_max}")
    return not failures, failures


def write_metrics(run_dir: str | Path) -> dict:
    """Compute and persist metrics.json; byte-stable for a given run."""
    run_dir = Path(run_dir)
    metrics = compute_metrics(run_dir)
    (run_dir / "metrics.json").write_text(json.dumps(metrics, indent=1, sort_keys=True) + "\n")
    return metrics
