"""Recorded-trajectory ingestion: TSV loading, resampling to the simulation
timestep, and extraction of simulation-ready agents with ground-truth futures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError
from .grid import Cell, GridEnvironment, Point, world_to_grid

Row = tuple[int, int, float, float]  # frame, agent_id, x, y


@dataclass(frozen=True)
class TrajectoryDataset:
    rows: tuple[Row, ...]          # sorted by (agent_id, frame)
    frame_interval: float


@dataclass(frozen=True)
class AgentSeed:
    id: int
    observed: tuple[Point, ...]
    start_cell: Cell
    destination: Cell
    preferred_speed: float
    real_future: tuple[Point, ...]
    spawn_step: int


@dataclass(frozen=True)
class ExtractionResult:
    seeds: tuple[AgentSeed, ...]
    skipped: int      # too short, irregular spacing, or blocked endpoint cells
    relocated: int    # start cells moved off duplicates


def _parse_number(token: str, what: str):
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"non-numeric {what}: {token!r}")


def load_trajectories(path: str | Path, frame_interval: float = 0.4) -> TrajectoryDataset:
    """Parse `frame<TAB>agent_id<TAB>x<TAB>y` rows; blank lines and
    #-comments are ignored."""
    rows: list[Row] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            try:
                if len(tokens) != 4:
                    raise ValueError(f"expected 4 fields, got {len(tokens)}")
                frame_f = _parse_number(tokens[0], "frame")
                if abs(frame_f - round(frame_f)) > 1e-6:
                    raise ValueError(f"frame must be an integer: {tokens[0]!r}")
                agent_f = _parse_number(tokens[1], "agent id")
                x = _parse_number(tokens[2], "x")
                y = _parse_number(tokens[3], "y")
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from exc
            rows.append((int(round(frame_f)), int(round(agent_f)), x, y))
    rows.sort(key=lambda r: (r[1], r[0]))
    return TrajectoryDataset(tuple(rows), frame_interval)


def resample(
    ds: TrajectoryDataset,
    target_interval: float,
    source_interval: float | None = None,
) -> TrajectoryDataset:
    """Downsample (integer ratio) or linearly interpolate to the target
    spacing. The phase anchors at the global minimum frame so agents stay
    aligned with each other."""
    source = ds.frame_interval if source_interval is None else source_interval
    if target_interval <= 0 or source <= 0:
        raise ValueError("intervals must be positive")
    if not ds.rows:
        return TrajectoryDataset((), target_interval)
    ratio = target_interval / source
    f_min = min(r[0] for r in ds.rows)
    if abs(ratio - round(ratio)) < 1e-9:
        k = int(round(ratio))
        if k == 1:
            return TrajectoryDataset(ds.rows, target_interval)
        rows = tuple(
            ((f - f_min) // k, a, x, y)
            for f, a, x, y in ds.rows
            if (f - f_min) % k == 0
        )
        return TrajectoryDataset(rows, target_interval)
    # fractional ratio: interpolate each agent at the shared target grid
    per_agent: dict[int, list[Row]] = {}
    for row in ds.rows:
        per_agent.setdefault(row[1], []).append(row)
    out: list[Row] = []
    for agent_id in sorted(per_agent):
        rows = per_agent[agent_id]
        times = [(f - f_min) * source for f, _, _, _ in rows]
        j = math.ceil(times[0] / target_interval - 1e-9)
        idx = 0
        while True:
            t = j * target_interval
            if t > times[-1] + 1e-9:
                break
            while idx + 1 < len(times) and times[idx + 1] < t - 1e-9:
                idx += 1
            if idx + 1 >= len(times):
                f0, _, x0, y0 = rows[idx]
                out.append((j, agent_id, x0, y0))
            else:
                t0, t1 = times[idx], times[idx + 1]
                frac = 0.0 if t1 == t0 else min(max((t - t0) / (t1 - t0), 0.0), 1.0)
                _, _, x0, y0 = rows[idx]
                _, _, x1, y1 = rows[idx + 1]
                out.append((j, agent_id, x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)))
            j += 1
    out.sort(key=lambda r: (r[1], r[0]))
    return TrajectoryDataset(tuple(out), target_interval)


def _nearest_free_unclaimed(env: GridEnvironment, cell: Cell, claimed: set[Cell]) -> Cell:
    best = None
    best_key = None
    for i in range(env.width):
        for j in range(env.height):
            c = (i, j)
            if c in claimed or not env.is_free(c):
                continue
            key = ((i - cell[0]) ** 2 + (j - cell[1]) ** 2, i, j)
            if best_key is None or key < best_key:
                best_key = key
                best = c
    if best is None:
        raise ValueError("no free cell left for collision resolution")
    return best


def extract_agents(
    ds: TrajectoryDataset,
    env: GridEnvironment,
    h_obs: int = 8,
    t_p: int = 12,
    min_total_len: int | None = None,
) -> ExtractionResult:
    """Turn recorded trajectories into simulation seeds.

    An agent qualifies when it has at least h_obs + t_p (or min_total_len)
    frames at a constant spacing and its hand-off and final cells are free.
    The first h_obs positions become the observed window, the rest the
    ground-truth future; the simulation takes over at observed[-1].
    """
    min_total = min_total_len if min_total_len is not None else h_obs + t_p
    if not ds.rows:
        return ExtractionResult((), 0, 0)
    f_min = min(r[0] for r in ds.rows)
    per_agent: dict[int, list[Row]] = {}
    for row in ds.rows:
        per_agent.setdefault(row[1], []).append(row)

    # common frame stride (handles raw frame numbering like 0, 10, 20, ...)
    diffs = [
        b[0] - a[0]
        for rows in per_agent.values()
        for a, b in zip(rows, rows[1:])
    ]
    stride = min(diffs) if diffs else 1

    seeds: list[AgentSeed] = []
    skipped = 0
    for agent_id in sorted(per_agent):
        rows = per_agent[agent_id]
        if len(rows) < min_total:
            skipped += 1
            continue
        if any(b[0] - a[0] != stride for a, b in zip(rows, rows[1:])):
            skipped += 1
            continue
        positions = [(x, y) for _, _, x, y in rows]
        observed = positions[:h_obs]
        future = positions[h_obs:]
        try:
            start_cell = world_to_grid(observed[-1], env)
            dest_cell = world_to_grid(positions[-1], env)
        except ValueError:
            skipped += 1
            continue
        if not env.is_free(start_cell) or not env.is_free(dest_cell):
            skipped += 1
            continue
        hops = [
            math.hypot(b[0] - a[0], b[1] - a[1])
            for a, b in zip(observed, observed[1:])
        ]
        speed = (sum(hops) / len(hops)) / ds.frame_interval if hops else 0.0
        speed = max(speed, 1e-3)
        spawn = (rows[0][0] - f_min) // stride + h_obs - 1
        seeds.append(AgentSeed(
            id=agent_id,
            observed=tuple(observed),
            start_cell=start_cell,
            destination=dest_cell,
            preferred_speed=speed,
            real_future=tuple(future),
            spawn_step=spawn,
        ))

    # start cells must be pairwise distinct; bump duplicates to the nearest
    # free unclaimed cell
    claimed: set[Cell] = set()
    relocated = 0
    resolved: list[AgentSeed] = []
    for seed in seeds:
        cell = seed.start_cell
        if cell in claimed:
            cell = _nearest_free_unclaimed(env, cell, claimed)
            seed = AgentSeed(
                seed.id, seed.observed, cell, seed.destination,
                seed.preferred_speed, seed.real_future, seed.spawn_step,
            )
            relocated += 1
        claimed.add(cell)
        resolved.append(seed)
    return ExtractionResult(tuple(resolved), skipped, relocated)


def real_rows(seeds) -> list[tuple[int, int, float, float, str]]:
    """Ground-truth rows aligned with the simulation's step numbering."""
    rows = []
    for seed in seeds:
        for k, (x, y) in enumerate(seed.real_future, start=1):
            rows.append((seed.spawn_step + k, seed.id, x, y, "real"))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def convert_columns(
    in_path: str | Path,
    out_path: str | Path,
    cols: str,
) -> int:
    """Rewrite a whitespace-separated trajectory file into canonical
    frame/id/x/y TSV given the input column order, e.g. "frame,id,y,x"."""
    names = [c.strip() for c in cols.split(",")]
    if sorted(names) != ["frame", "id", "x", "y"]:
        raise ValueError(f"--cols must name frame,id,x,y exactly once, got {cols!r}")
    order = {name: k for k, name in enumerate(names)}
    count = 0
    with open(in_path) as src, open(out_path, "w") as dst:
        for line_no, line in enumerate(src, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            if len(tokens) < 4:
                raise ParseError(in_path, line_no, f"expected 4 fields, got {len(tokens)}")
            dst.write("\t".join(
                tokens[order[name]] for name in ("frame", "id", "x", "y")
            ) + "\n")
            count += 1
    return count
