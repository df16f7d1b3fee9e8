"""Movement-trend predictors.

Three interchangeable sources of per-agent trend distributions:

* baseline  — degenerate Gaussians strung along the A* shortest path, spaced
  by preferred_speed * dt (the rule-based reference behavior);
* trend file — pre-computed trends read from a JSON Lines file;
* lockstep  — per-cycle file exchange with an external predictor process
  (write history_<cycle>.jsonl, block for trends_<cycle>.jsonl).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import NoPathError, ParseError, PredictorUnavailableError
from .fields import TrendDistribution
from .grid import Cell, GridEnvironment, Point, grid_to_world, world_to_grid
from .fields import astar

BASELINE_SIGMA = 1e-6


@dataclass(frozen=True)
class PredictorKind:
    mode: str                  # baseline | trend_file | lockstep
    path: str | None = None    # trend file, or lockstep directory
    timeout: float = 30.0

    def __post_init__(self):
        if self.mode not in ("baseline", "trend_file", "lockstep"):
            raise ValueError(f"unknown predictor mode {self.mode!r}")
        if self.mode != "baseline" and not self.path:
            raise ValueError(f"predictor mode {self.mode!r} needs a path")


@dataclass(frozen=True)
class SnapshotEntry:
    agent_id: int
    positions: tuple[Point, ...]   # oldest first, padded to the history length
    destination: Cell
    preferred_speed: float


@dataclass(frozen=True)
class HistorySnapshot:
    cycle: int
    step: int
    entries: tuple[SnapshotEntry, ...]


def _walk_polyline(polyline: list[Point], distances: list[float]) -> list[Point]:
    """Points at the given arc lengths along the polyline, clamped at its end."""
    if len(polyline) == 1:
        return [polyline[0]] * len(distances)
    seg_len = [
        math.hypot(b[0] - a[0], b[1] - a[1])
        for a, b in zip(polyline, polyline[1:])
    ]
    total = sum(seg_len)
    out = []
    for d in distances:
        if d >= total:
            out.append(polyline[-1])
            continue
        acc = 0.0
        for (a, b), L in zip(zip(polyline, polyline[1:]), seg_len):
            if acc + L >= d and L > 0:
                f = (d - acc) / L
                out.append((a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])))
                break
            acc += L
        else:
            out.append(polyline[-1])
    return out


class BaselinePredictor:
    """Shortest-path rule: the trend marches toward the destination along the
    A* path at the agent's preferred speed, with near-zero spread."""

    def __init__(self, t_p: int, dt: float):
        self.t_p = t_p
        self.dt = dt

    def predict_single(
        self, entry: SnapshotEntry, env: GridEnvironment, step: int
    ) -> TrendDistribution:
        start = world_to_grid(entry.positions[-1], env)
        try:
            path = astar(env, start, entry.destination)
        except NoPathError:
            # walled-off destination: aim the trend at the destination cell;
            # the agent's side of the wall stays impassable and it waits
            path = [entry.destination]
        polyline = [grid_to_world(c, env) for c in path]
        spacing = entry.preferred_speed * self.dt
        mus = _walk_polyline(polyline, [k * spacing for k in range(1, self.t_p + 1)])
        steps = tuple((x, y, BASELINE_SIGMA, BASELINE_SIGMA, 0.0) for x, y in mus)
        return TrendDistribution(entry.agent_id, step, steps)

    def predict(
        self, snapshot: HistorySnapshot, env: GridEnvironment
    ) -> dict[int, TrendDistribution]:
        return {
            e.agent_id: self.predict_single(e, env, snapshot.step)
            for e in snapshot.entries
        }


class TrendFilePredictor:
    """Replays stored trends; for each agent the record with the largest
    made_at_step not exceeding the current step wins. Agents without a usable
    record fall back to the baseline rule."""

    def __init__(self, path: str | Path, t_p: int, dt: float):
        self.records: dict[int, list[TrendDistribution]] = {}
        for rec in parse_trend_file(path, expected_len=t_p):
            self.records.setdefault(rec.agent_id, []).append(rec)
        for recs in self.records.values():
            recs.sort(key=lambda r: r.made_at_step)
        self.baseline = BaselinePredictor(t_p, dt)

    def _lookup(self, agent_id: int, step: int) -> TrendDistribution | None:
        best = None
        for rec in self.records.get(agent_id, ()):
            if rec.made_at_step <= step:
                best = rec
            else:
                break
        return best

    def predict_single(
        self, entry: SnapshotEntry, env: GridEnvironment, step: int
    ) -> TrendDistribution:
        rec = self._lookup(entry.agent_id, step)
        return rec if rec is not None else self.baseline.predict_single(entry, env, step)

    def predict(
        self, snapshot: HistorySnapshot, env: GridEnvironment
    ) -> dict[int, TrendDistribution]:
        return {
            e.agent_id: self.predict_single(e, env, snapshot.step)
            for e in snapshot.entries
        }


class LockstepPredictor:
    """File-exchange loop with an external predictor watching a directory."""

    def __init__(
        self, directory: str | Path, t_p: int, dt: float,
        timeout: float = 30.0, poll: float = 0.05,
    ):
        self.dir = Path(directory)
        self.t_p = t_p
        self.timeout = timeout
        self.poll = poll
        self.baseline = BaselinePredictor(t_p, dt)

    def predict_single(
        self, entry: SnapshotEntry, env: GridEnvironment, step: int
    ) -> TrendDistribution:
        # off-cycle queries (mid-run spawns) use the baseline rule rather than
        # colliding with the per-cycle file numbering
        return self.baseline.predict_single(entry, env, step)

    def predict(
        self, snapshot: HistorySnapshot, env: GridEnvironment
    ) -> dict[int, TrendDistribution]:
        self.dir.mkdir(parents=True, exist_ok=True)
        write_history_file(snapshot, self.dir / f"history_{snapshot.cycle}.jsonl")
        response = self.dir / f"trends_{snapshot.cycle}.jsonl"
        deadline = time.monotonic() + self.timeout
        while not response.exists():
            if time.monotonic() > deadline:
                raise PredictorUnavailableError(
                    f"no {response.name} within {self.timeout}s"
                )
            time.sleep(self.poll)
        records = {r.agent_id: r for r in parse_trend_file(response, self.t_p)}
        out = {}
        for e in snapshot.entries:
            out[e.agent_id] = records.get(e.agent_id) or self.baseline.predict_single(
                e, env, snapshot.step
            )
        return out


def make_predictor(kind: PredictorKind, t_p: int, dt: float):
    if kind.mode == "baseline":
        return BaselinePredictor(t_p, dt)
    if kind.mode == "trend_file":
        return TrendFilePredictor(kind.path, t_p, dt)
    return LockstepPredictor(kind.path, t_p, dt, timeout=kind.timeout)


# ------------------------------------------------------------ file formats

def parse_trend_file(path: str | Path, expected_len: int | None = None
                     ) -> list[TrendDistribution]:
    """Trend JSONL: {"agent_id", "made_at_step", "steps": [[mx,my,sx,sy,rho]*T_p]}."""
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
                steps = tuple(tuple(float(v) for v in s) for s in obj["steps"])
                if any(len(s) != 5 for s in steps):
                    raise ValueError("each step needs 5 numbers")
                rec = TrendDistribution(
                    int(obj["agent_id"]), int(obj["made_at_step"]), steps
                )
                rec.validate(expected_len)
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise ParseError(path, line_no, str(exc)) from exc
            records.append(rec)
    return records


def write_history_file(snapshot: HistorySnapshot, path: str | Path) -> None:
    """History JSONL, written atomically so a polling reader never sees a
    partial file."""
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        for e in snapshot.entries:
            fh.write(json.dumps({
                "agent_id": e.agent_id,
                "cycle": snapshot.cycle,
                "positions": [[x, y] for x, y in e.positions],
                "destination": list(e.destination),
            }) + "\n")
    os.replace(tmp, path)
