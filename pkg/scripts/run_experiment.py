#!/usr/bin/env python3
"""Run the standard comparison experiment on one scene/crowd pair: simulate
both modes, evaluate each against the recorded futures, and sweep the
data-driven period.

Usage:
  python3 scripts/make_synthetic_scene.py --out data/synth
  python3 scripts/run_experiment.py --scene data/synth/scene.json \
      --agents data/synth/crowd.tsv --trends data/synth/trends.jsonl \
      --out runs/synth
"""

import argparse
import json
from pathlib import Path

from navfield.cli import main as cli


def sh(argv):
    code = cli([str(a) for a in argv])
    if code != 0:
        raise SystemExit(code)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scene", required=True)
    ap.add_argument("--agents", required=True)
    ap.add_argument("--trends", default=None)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sweep", default="1..12")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    out = Path(args.out)
    modes = [("baseline", [])]
    if args.trends:
        modes.append(("data-driven", ["--trends", args.trends]))

    results = {}
    for mode, extra in modes:
        run_dir = out / f"run_{mode}"
        sh(["simulate", "--scene", args.scene, "--agents", args.agents,
            "--mode", mode, *extra, "--seed", args.seed, "--out", run_dir])
        eval_dir = out / f"eval_{mode}"
        sh(["evaluate", "--sim", run_dir / "trajectory.csv",
            "--real", run_dir / "real.csv", "--scene", args.scene,
            "--kde", "--out", eval_dir])
        results[mode] = json.loads((eval_dir / "report.json").read_text())

    if args.sweep:
        sh(["sweep-td", "--scene", args.scene, "--agents", args.agents,
            "--td-values", args.sweep, "--seed", args.seed,
            "--out", out / "sweep"])

    print(f"\n{'mode':<12} {'ADE (m)':>10} {'Jaccard':>10}")
    for mode, report in results.items():
        print(f"{mode:<12} {report['ade_m']:>10.4f} {report['jaccard']:>10.4f}")


if __name__ == "__main__":
    main()
