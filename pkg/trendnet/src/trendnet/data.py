"""Training windows from recorded trajectories.

Input is the canonical trajectory TSV (frame, agent id, x, y; tab separated,
# comments) already spaced at the simulation timestep. A window collects the
agents co-present for t_obs + t_p consecutive frames; training runs on the
jointly observed group.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Window:
    ids: tuple[int, ...]
    obs: np.ndarray            # (t_obs, N, 2)
    fut: np.ndarray            # (t_p, N, 2)
    prev: np.ndarray | None    # (N, 2) frame before the window, if all present


def load_rows(path: str | Path) -> dict[int, dict[int, tuple[float, float]]]:
    """agent -> frame -> position."""
    table: dict[int, dict[int, tuple[float, float]]] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            if len(tokens) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 fields")
            frame = int(float(tokens[0]))
            agent = int(float(tokens[1]))
            table.setdefault(agent, {})[frame] = (float(tokens[2]), float(tokens[3]))
    return table


def extract_windows(
    path: str | Path,
    t_obs: int = 8,
    t_p: int = 12,
    stride: int = 1,
    min_agents: int = 1,
) -> list[Window]:
    table = load_rows(path)
    if not table:
        return []
    frames = sorted({f for traj in table.values() for f in traj})
    span = t_obs + t_p
    windows: list[Window] = []
    for start in frames[:: max(stride, 1)]:
        needed = range(start, start + span)
        ids = tuple(sorted(
            agent for agent, traj in table.items()
            if all(f in traj for f in needed)
        ))
        if len(ids) < min_agents:
            continue
        obs = np.array([[table[a][f] for a in ids] for f in needed[:t_obs]])
        fut = np.array([[table[a][f] for a in ids] for f in needed[t_obs:]])
        prev = None
        if all(start - 1 in table[a] for a in ids):
            prev = np.array([table[a][start - 1] for a in ids])
        windows.append(Window(ids=ids, obs=obs, fut=fut, prev=prev))
    return windows
