"""Simulator-facing file exchange.

Reads the simulator's history JSONL (one line per agent: id, cycle, last
observed positions, destination cell), runs the model on the co-present
group, and writes trend JSONL records the simulator can consume. Files are
written to a temp name and renamed so a polling reader never sees a partial
file; that is what makes the lockstep serve loop safe.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np
import torch

from .graphs import build_graphs
from .model import TrendSTGCN

SIGMA_FLOOR = 1e-6


def read_history(path: str | Path) -> list[dict]:
    entries = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
                entries.append({
                    "agent_id": int(obj["agent_id"]),
                    "cycle": int(obj["cycle"]),
                    "positions": [(float(x), float(y)) for x, y in obj["positions"]],
                    "destination": tuple(obj["destination"]),
                })
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from exc
    return entries


def predict_trends(
    model: TrendSTGCN, entries: list[dict], dt: float = 0.4
) -> dict[int, list[list[float]]]:
    """Per-agent [mu_x, mu_y, sigma_x, sigma_y, rho] rows over the horizon."""
    if not entries:
        return {}
    entries = sorted(entries, key=lambda e: e["agent_id"])
    t_obs = model.t_obs
    positions = []
    for e in entries:
        pos = list(e["positions"])
        while len(pos) < t_obs:
            pos.insert(0, pos[0])
        positions.append(pos[-t_obs:])
    window = np.array(positions).transpose(1, 0, 2)  # (T, N, 2)
    disp, _, adj = build_graphs(window, dt)
    with torch.no_grad():
        mu, sigma, rho, _ = model(
            torch.as_tensor(disp, dtype=torch.float32),
            torch.as_tensor(adj, dtype=torch.float32),
        )
    sigma = sigma.clamp_min(SIGMA_FLOOR)
    out = {}
    for n, e in enumerate(entries):
        steps = []
        for t in range(model.t_p):
            steps.append([
                float(mu[t, n, 0]), float(mu[t, n, 1]),
                float(sigma[t, n, 0]), float(sigma[t, n, 1]),
                float(rho[t, n]),
            ])
        out[e["agent_id"]] = steps
    return out


def write_trends(
    trends: dict[int, list[list[float]]], path: str | Path, made_at_step: int = 0
) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        for agent_id in sorted(trends):
            fh.write(json.dumps({
                "agent_id": agent_id,
                "made_at_step": made_at_step,
                "steps": trends[agent_id],
            }) + "\n")
    os.replace(tmp, path)


def export_trends(
    model: TrendSTGCN,
    history_path: str | Path,
    out_path: str | Path,
    dt: float = 0.4,
    made_at_step: int = 0,
) -> int:
    entries = read_history(history_path)
    trends = predict_trends(model, entries, dt)
    write_trends(trends, out_path, made_at_step)
    return len(trends)


def serve_lockstep(
    model: TrendSTGCN,
    directory: str | Path,
    cycles: int,
    dt: float = 0.4,
    timeout: float = 60.0,
    poll: float = 0.05,
) -> int:
    """Answer history_<k>.jsonl files with trends_<k>.jsonl until `cycles`
    responses are written or the wait times out."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    served = 0
    deadline = time.monotonic() + timeout
    while served < cycles and time.monotonic() < deadline:
        pending = []
        for hist in directory.glob("history_*.jsonl"):
            kind = hist.stem.split("_", 1)[1]
            if not (directory / f"trends_{kind}.jsonl").exists():
                pending.append((int(kind), hist))
        if not pending:
            time.sleep(poll)
            continue
        for cycle, hist in sorted(pending):
            entries = read_history(hist)
            trends = predict_trends(model, entries, dt)
            write_trends(trends, directory / f"trends_{cycle}.jsonl")
            served += 1
            deadline = time.monotonic() + timeout
    return served
