"""Simulation-vs-recording comparison: average distance error, occupancy
heatmaps with leveled Jaccard similarity, kernel-density curves, per-agent
travel statistics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridEnvironment, world_to_grid

Trajectories = "dict[int, dict[int, tuple[float, float]]]"  # agent -> step -> position


def trajectories_from_rows(rows) -> dict[int, dict[int, tuple[float, float]]]:
    out: dict[int, dict[int, tuple[float, float]]] = {}
    for step, agent_id, x, y, *_ in rows:
        out.setdefault(agent_id, {})[step] = (x, y)
    return out


def ade(
    sim: dict[int, dict[int, tuple[float, float]]],
    real: dict[int, dict[int, tuple[float, float]]],
    horizon: int,
) -> float:
    """Mean over agents of the per-agent mean Euclidean error across up to
    `horizon` time-aligned steps (shorter overlaps use their own length)."""
    common = sorted(set(sim) & set(real))
    if not common:
        raise ValueError("no common agents between the two trajectory sets")
    per_agent = []
    for agent_id in common:
        steps = sorted(set(sim[agent_id]) & set(real[agent_id]))[:horizon]
        if not steps:
            continue
        errs = [
            math.hypot(
                sim[agent_id][s][0] - real[agent_id][s][0],
                sim[agent_id][s][1] - real[agent_id][s][1],
            )
            for s in steps
        ]
        per_agent.append(sum(errs) / len(errs))
    if not per_agent:
        raise ValueError("no overlapping timesteps between the two trajectory sets")
    return sum(per_agent) / len(per_agent)


def heatmap(rows, env: GridEnvironment) -> np.ndarray:
    """Per-cell visit counts over every logged position."""
    counts = np.zeros((env.width, env.height), dtype=np.int64)
    for _, _, x, y, *_ in rows:
        i, j = world_to_grid((x, y), env)
        counts[i, j] += 1
    return counts


def _level_sets(h: np.ndarray, levels: int) -> list[set]:
    """Partition nonzero cells into quantile bands of this heatmap's counts."""
    nz_idx = np.argwhere(h > 0)
    if len(nz_idx) == 0:
        return [set() for _ in range(levels)]
    counts = h[h > 0]
    qs = np.quantile(counts, [k / levels for k in range(1, levels)])
    band = np.digitize(counts, qs, right=True)  # 0 .. levels-1
    sets: list[set] = [set() for _ in range(levels)]
    for (i, j), b in zip(nz_idx, band):
        sets[int(b)].add((int(i), int(j)))
    return sets


def jaccard_similarity(h1: np.ndarray, h2: np.ndarray, levels: int = 3) -> float:
    """Mean over quantile bands of |A_k & B_k| / |A_k | B_k| (1 when both
    bands are empty)."""
    if h1.shape != h2.shape:
        raise ValueError(f"heatmap shapes differ: {h1.shape} vs {h2.shape}")
    if levels < 1:
        raise ValueError("levels must be at least 1")
    a_sets = _level_sets(h1, levels)
    b_sets = _level_sets(h2, levels)
    scores = []
    for a, b in zip(a_sets, b_sets):
        union = a | b
        scores.append(1.0 if not union else len(a & b) / len(union))
    return sum(scores) / levels


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2:
        return 1.0
    std = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr_scale = (q75 - q25) / 1.34
    # heavy ties (common here: grid agents share travel distances) collapse
    # the IQR term far below the spread; fall back to the std term then
    if iqr_scale > 0 and iqr_scale >= std / 10:
        scale = min(std, iqr_scale)
    else:
        scale = std
    h = 0.9 * scale * n ** (-0.2)
    return max(h, 1e-6)


def kde_export(
    samples,
    bandwidth: float | None = None,
    grid_points: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density on an even grid spanning [min-3h, max+3h].

    grid_points is a minimum: the grid is refined until its spacing resolves
    the bandwidth (several points per kernel width), so the exported curve
    carries the full probability mass even when ties drive Silverman's rule
    toward tiny bandwidths.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one sample")
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    span = (x.max() - x.min()) + 6 * h
    resolved = int(3 * span / h) + 1
    n = max(grid_points, min(resolved, 1_000_000))
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, n)
    z = (grid[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z**2).sum(axis=1) / (len(x) * h * math.sqrt(2 * math.pi))
    return grid, density


def write_kde_csv(grid: np.ndarray, density: np.ndarray, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("x,density\n")
        for x, d in zip(grid, density):
            fh.write(f"{x:.10g},{d:.10g}\n")


def write_heatmap_csv(counts: np.ndarray, path: str | Path) -> None:
    w, h = counts.shape
    with open(path, "w") as fh:
        for j in range(h):
            fh.write(",".join(str(int(counts[i, j])) for i in range(w)) + "\n")


def travel_stats(points, dt: float) -> tuple[float, float]:
    """(polyline length, mean speed) of one agent's position sequence."""
    if len(points) < 2:
        raise ValueError("need at least two points")
    dist = sum(
        math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(points, points[1:])
    )
    return dist, dist / ((len(points) - 1) * dt)


@dataclass
class MetricsReport:
    ade: float
    jaccard: float
    per_agent: dict
    kde_files: dict
    extras: dict

    def to_dict(self) -> dict:
        return {
            "ade_m": self.ade,
            "jaccard": self.jaccard,
            "per_agent": self.per_agent,
            "kde_files": self.kde_files,
            **self.extras,
        }

    def write(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
