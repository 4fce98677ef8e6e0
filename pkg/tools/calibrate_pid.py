#!/usr/bin/env python3
"""Sweep velocity-layer PID gains against the line profile.

For each candidate (kp, ki) pair, runs the closed-loop line scenario and
reports peak speed and max tracking error. The shipped defaults were the
smallest gains that reach the 4.45 m/s profile peak with comfortable
error margin.

Usage: python3 tools/calibrate_pid.py [--quick]
"""

import argparse
import itertools
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from mecafleet.config import load_config
from mecafleet.runner import run_scenario


def evaluate(kp: float, ki: float, out_dir: str) -> tuple[float, float]:
    config = load_config(overrides={
        "name": f"cal-kp{kp:g}-ki{ki:g}",
        "scenario.kind": "line_track",
        "duration_s": 6.0,
        "pid.kp": kp,
        "pid.ki": ki,
    })
    artifacts = run_scenario(config, out_dir=out_dir)
    fleet = artifacts.metrics["fleet"]
    return fleet["peak_speed"], fleet["max_error"]


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="3x2 grid instead of 5x4")
    args = parser.parse_args()

    kps = [20.0, 60.0, 120.0] if args.quick else [20.0, 40.0, 60.0, 90.0, 120.0]
    kis = [0.0, 20.0] if args.quick else [0.0, 10.0, 20.0, 40.0]

    print(f"{'kp':>6} {'ki':>6} {'peak m/s':>9} {'max err m':>10}  verdict")
    with tempfile.TemporaryDirectory() as tmp:
        for i, (kp, ki) in enumerate(itertools.product(kps, kis)):
            peak, err = evaluate(kp, ki, f"{tmp}/run{i}")
            verdict = "ok" if peak >= 4.4 and err <= 0.5 else "reject"
            print(f"{kp:>6g} {ki:>6g} {peak:>9.3f} {err:>10.3f}  {verdict}")


if __name__ == "__main__":
    main()
