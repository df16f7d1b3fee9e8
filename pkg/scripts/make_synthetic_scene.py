#!/usr/bin/env python3
"""Generate a synthetic experiment kit: scene JSON, a recorded-style crowd
TSV (straight walkers on crossing lanes), and a matching trend JSONL so both
simulation modes can run without a real dataset.

Usage: python3 scripts/make_synthetic_scene.py --out data/synth --agents 20
"""

import argparse
import json
from pathlib import Path

import numpy as np

from navfield.grid import save_scene


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--agents", type=int, default=20)
    ap.add_argument("--frames", type=int, default=24)
    ap.add_argument("--size", type=float, default=12.0, help="scene edge, meters")
    ap.add_argument("--seed", type=int, default=123)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    mid = args.size / 2
    save_scene(out / "scene.json", (0.0, 0.0, args.size, args.size), 0.4,
               [(mid - 0.4, mid - 0.4, mid + 0.4, mid + 0.4)])

    lanes = max(1, (args.agents + 1) // 2)
    spacing = (args.size - 2.0) / lanes
    with open(out / "crowd.tsv", "w") as fh:
        fh.write("# frame\tid\tx\ty\n")
        for agent in range(1, args.agents + 1):
            horizontal = agent % 2 == 0
            lane = 1.0 + spacing * ((agent - 1) // 2)
            speed = float(rng.uniform(0.16, 0.3))  # meters per 0.4 s frame
            start = float(rng.uniform(0.5, 1.8))
            for k in range(args.frames):
                along = start + speed * k
                x, y = (along, lane) if horizontal else (lane, along)
                fh.write(f"{k}\t{agent}\t{x:.4f}\t{y:.4f}\n")

    with open(out / "trends.jsonl", "w") as fh:
        for agent in range(1, args.agents + 1):
            horizontal = agent % 2 == 0
            lane = 1.0 + spacing * ((agent - 1) // 2)
            steps = []
            for k in range(1, 13):
                along = 2.2 + 0.25 * k
                x, y = (along, lane) if horizontal else (lane, along)
                steps.append([x, y, 0.08, 0.08, 0.1])
            fh.write(json.dumps(
                {"agent_id": agent, "made_at_step": 0, "steps": steps}) + "\n")

    print(f"wrote {out}/scene.json, {out}/crowd.tsv, {out}/trends.jsonl")


if __name__ == "__main__":
    main()
