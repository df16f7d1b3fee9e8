"""Potential-field construction.

Three field families drive an agent:

* a per-agent navigation field built from a predicted movement-trend line
  (sampled from per-step bivariate Gaussians, interpolated with A*, expanded
  outward), then propagated into a scalar matrix by shortest-cost order;
* a static obstacle repulsion field;
* a per-step pedestrian repulsion field sourced from the cells other agents
  swept during the last step.

Scalar matrices use +inf for impassable cells so summation keeps them
impassable.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoPathError
from .grid import (
    NEIGHBOR_OFFSETS,
    Cell,
    GridEnvironment,
    Point,
    grid_to_world,
    nearest_free_cell,
    neighbors8,
    world_to_grid,
)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TrendDistribution:
    """Predicted future positions of one agent as per-step Gaussians.

    Each step is (mu_x, mu_y, sigma_x, sigma_y, rho) in meters.
    """

    agent_id: int
    made_at_step: int
    steps: tuple[tuple[float, float, float, float, float], ...]

    def validate(self, expected_len: int | None = None) -> None:
        if expected_len is not None and len(self.steps) != expected_len:
            raise ValueError(
                f"trend for agent {self.agent_id} has {len(self.steps)} steps, "
                f"expected {expected_len}"
            )
        for k, (mx, my, sx, sy, rho) in enumerate(self.steps):
            if not all(math.isfinite(v) for v in (mx, my, sx, sy, rho)):
                raise ValueError(f"non-finite trend parameters at step {k}")
            if sx <= 0 or sy <= 0:
                raise ValueError(f"sigma must be positive at step {k}")
            if abs(rho) >= 1:
                raise ValueError(f"|rho| must be < 1 at step {k}")


@dataclass(frozen=True)
class FieldParams:
    """Tunables for all field constructions (ranges in cell units)."""

    delta: float = 1.0       # obstacle repulsion range
    epsilon: float = 1.0     # pedestrian repulsion range
    lambda_o: float = 1.0    # obstacle repulsion strength
    lambda_h: float = 1.0    # pedestrian repulsion strength
    r: int = 4               # navigation-field expansion rounds
    l: float = 1.0           # gradient scale between adjacent cells
    v_0: float = 0.0         # potential at the destination
    kappa: float = 2.0       # propagation weight outside the expanded domain

    def __post_init__(self):
        if self.delta < 1 or self.epsilon < 1:
            raise ValueError("field ranges must be at least one cell")
        if self.lambda_o <= 0 or self.lambda_h <= 0 or self.l <= 0:
            raise ValueError("field strengths and gradient scale must be positive")
        if self.r < 0:
            raise ValueError("expansion radius must be non-negative")


@dataclass
class DirectionField:
    """Per-cell guidance vectors around a trend line.

    `vectors` holds only cells inside the expanded domain; obstacle cells are
    implicitly marked impassable, and cells never reached in `radius`
    expansion rounds carry no vector at all.
    """

    vectors: dict[Cell, tuple[int, int]]
    line: list[Cell]
    radius: int


@dataclass(frozen=True)
class FieldMatrix:
    """Scalar per-cell potential; kind is navigation/obstacle/pedestrian/global."""

    values: np.ndarray
    kind: str


@dataclass(frozen=True)
class PedestrianSweep:
    agent_id: int
    cells: frozenset[Cell]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("sweep must contain at least the agent's cell")


# ---------------------------------------------------------------- sampling

def sample_trend_points(
    dist: TrendDistribution, env: GridEnvironment, rng_seed
) -> list[Point]:
    """Draw one position per trend step; out-of-bounds draws snap to the
    nearest free cell center. Deterministic for a fixed seed."""
    rng = np.random.default_rng(rng_seed)
    xmin, ymin, xmax, ymax = env.bounds
    points: list[Point] = []
    for mx, my, sx, sy, rho in dist.steps:
        z1, z2 = rng.standard_normal(2)
        x = mx + sx * z1
        y = my + sy * (rho * z1 + math.sqrt(1.0 - rho * rho) * z2)
        if not (xmin <= x < xmax and ymin <= y < ymax):
            x, y = grid_to_world(nearest_free_cell((x, y), env), env)
        points.append((x, y))
    return points


# ------------------------------------------------------------ path search

def _octile(a: Cell, b: Cell) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar(env: GridEnvironment, start: Cell, goal: Cell) -> list[Cell]:
    """Shortest 8-connected path (1 orthogonal, sqrt(2) diagonal).

    Ties resolve by neighbor scan order then insertion order, so the result
    is deterministic.
    """
    for c, name in ((start, "start"), (goal, "goal")):
        if not env.is_free(c):
            raise ValueError(f"{name} cell {c} is not a free in-bounds cell")
    if start == goal:
        return [start]
    g = {start: 0.0}
    parent: dict[Cell, Cell | None] = {start: None}
    tick = itertools.count()
    heap = [(_octile(start, goal), next(tick), start)]
    done: set[Cell] = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in done:
            continue
        done.add(cur)
        if cur == goal:
            path = [cur]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])  # type: ignore[arg-type]
            path.reverse()
            return path
        base = g[cur]
        for n in neighbors8(cur, env):
            if n in done:
                continue
            step = SQRT2 if (n[0] != cur[0] and n[1] != cur[1]) else 1.0
            cand = base + step
            if cand < g.get(n, math.inf) - 1e-12:
                g[n] = cand
                parent[n] = cur
                heapq.heappush(heap, (cand + _octile(n, goal), next(tick), n))
    raise NoPathError(f"no path from {start} to {goal}")


def path_cost(path: list[Cell]) -> float:
    """Cost of a path, computed from move counts so equal-cost paths compare
    exactly (n_orth + n_diag*sqrt(2) has a unique integer decomposition)."""
    orth = diag = 0
    for a, b in zip(path, path[1:]):
        if a[0] != b[0] and a[1] != b[1]:
            diag += 1
        else:
            orth += 1
    return orth + SQRT2 * diag


def interpolate_trend_line(
    points: list[Point], destination: Cell, env: GridEnvironment
) -> list[Cell]:
    """Connect sampled points (and finally the destination) into one
    8-connected obstacle-free cell sequence."""
    waypoints: list[Cell] = []
    for p in points:
        c = world_to_grid(p, env)
        if not env.is_free(c):
            c = nearest_free_cell(grid_to_world(c, env), env)
        waypoints.append(c)
    waypoints.append(destination)
    line = [waypoints[0]]
    for nxt in waypoints[1:]:
        if nxt == line[-1]:
            continue
        seg = astar(env, line[-1], nxt)
        line.extend(seg[1:])
    return line


# --------------------------------------------------------- direction field

def raw_direction_vectors(line: list[Cell]) -> dict[Cell, tuple[int, int]]:
    """Coordinate difference to the next line cell; the final (destination)
    cell carries the zero vector. Repeated cells keep their last occurrence."""
    vecs: dict[Cell, tuple[int, int]] = {}
    for k, cell in enumerate(line):
        if k + 1 < len(line):
            nxt = line[k + 1]
            vecs[cell] = (nxt[0] - cell[0], nxt[1] - cell[1])
        else:
            vecs[cell] = (0, 0)
    return vecs


def expand_field(
    raw: dict[Cell, tuple[int, int]],
    line: list[Cell],
    r: int,
    env: GridEnvironment,
    rng_seed,
) -> DirectionField:
    """Grow the guidance domain outward for r synchronous rounds.

    Each round, every unmarked free cell adjacent to the marked set picks one
    of its adjacent marked cells uniformly at random (they all tie at
    Chebyshev distance 1) and stores the unit step toward it; new marks apply
    at round end. Obstacle cells never join the domain.
    """
    rng = np.random.default_rng(rng_seed)
    vectors = dict(raw)
    marked = set(raw)
    for _ in range(r):
        frontier: set[Cell] = set()
        for cell in marked:
            for di, dj in NEIGHBOR_OFFSETS:
                n = (cell[0] + di, cell[1] + dj)
                if n not in marked and env.is_free(n):
                    frontier.add(n)
        if not frontier:
            break
        for cell in sorted(frontier):
            anchors = [
                (cell[0] + di, cell[1] + dj)
                for di, dj in NEIGHBOR_OFFSETS
                if (cell[0] + di, cell[1] + dj) in marked
            ]
            pick = anchors[int(rng.integers(len(anchors)))]
            vectors[cell] = (pick[0] - cell[0], pick[1] - cell[1])
        marked |= frontier
    return DirectionField(vectors=vectors, line=list(line), radius=r)


# --------------------------------------------------------- repulsion kernel

def _repulsion(
    env: GridEnvironment,
    sources: list[Cell],
    reach: float,
    strength: float,
) -> np.ndarray:
    """Vector field strength*(reach-d)/d^2 * v toward cells within `reach`
    of the nearest source (d and v in cell units, between cell centers).
    Source cells get +inf components. Shape (width, height, 2)."""
    out = np.zeros((env.width, env.height, 2))
    if not sources:
        return out
    src = np.asarray(sorted(sources), dtype=np.int64)
    span = int(math.ceil(reach))
    offs = np.stack(
        np.meshgrid(np.arange(-span, span + 1), np.arange(-span, span + 1), indexing="ij"),
        axis=-1,
    ).reshape(-1, 2)
    cand = (src[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    ok = (
        (cand[:, 0] >= 0) & (cand[:, 0] < env.width)
        & (cand[:, 1] >= 0) & (cand[:, 1] < env.height)
    )
    cand = np.unique(cand[ok], axis=0)
    diff = cand[:, None, :].astype(float) - src[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    nearest = np.argmin(dist, axis=1)  # first minimum; src is sorted, so stable
    rows = np.arange(len(cand))
    dmin = dist[rows, nearest]
    vec = diff[rows, nearest]
    on_source = dmin == 0.0
    active = (~on_source) & (dmin <= reach + 1e-12)
    mag = np.zeros(len(cand))
    mag[active] = strength * (reach - dmin[active]) / (dmin[active] ** 2)
    values = mag[:, None] * vec
    values[on_source] = np.inf
    out[cand[:, 0], cand[:, 1]] = values
    return out


def obstacle_field(
    env: GridEnvironment, delta: float = 1.0, lambda_o: float = 1.0
) -> np.ndarray:
    """Static repulsion away from the nearest obstacle cell."""
    return _repulsion(env, env.obstacle_cells(), delta, lambda_o)


def pedestrian_field(
    sweeps: list[PedestrianSweep],
    exclude: int,
    epsilon: float,
    lambda_h: float,
    env: GridEnvironment,
) -> np.ndarray:
    """Repulsion away from the cells other agents swept during the last step."""
    sources: set[Cell] = set()
    for sweep in sweeps:
        if sweep.agent_id != exclude:
            sources |= sweep.cells
    return _repulsion(env, sorted(sources), epsilon, lambda_h)


# ----------------------------------------------------------- matrix forms

def field_to_matrix(
    f: DirectionField,
    destination: Cell,
    params: FieldParams,
    env: GridEnvironment,
) -> FieldMatrix:
    values, _ = _propagate(f, destination, params, env)
    return FieldMatrix(values, "navigation")


def _propagate(
    f: DirectionField,
    destination: Cell,
    params: FieldParams,
    env: GridEnvironment,
) -> tuple[np.ndarray, dict[Cell, Cell]]:
    """Shortest-cost propagation outward from the destination.

    Entering a trend-line cell costs l*|raw vector|; every other free cell
    costs l*kappa. With kappa above the largest line-vector magnitude the
    trend corridor is strictly the cheapest route, so greedy descent follows
    it (the expansion halo only contributes direction vectors, not
    discounts). Returns the value matrix and the predecessor map (toward the
    destination).
    """
    if not env.is_free(destination):
        raise ValueError(f"destination {destination} is not a free cell")
    values = np.full((env.width, env.height), np.inf)
    values[destination] = params.v_0
    parent: dict[Cell, Cell] = {}
    tick = itertools.count()
    heap = [(params.v_0, next(tick), destination)]
    done: set[Cell] = set()
    line_cells = set(f.line)

    def enter_cost(cell: Cell) -> float:
        if cell in line_cells:
            return params.l * math.hypot(*f.vectors[cell])
        return params.l * params.kappa

    while heap:
        val, _, cur = heapq.heappop(heap)
        if cur in done:
            continue
        done.add(cur)
        for n in neighbors8(cur, env):
            if n in done:
                continue
            cand = val + enter_cost(n)
            if cand < values[n]:
                values[n] = cand
                parent[n] = cur
                heapq.heappush(heap, (cand, next(tick), n))
    return values, parent


def magnitude_matrix(vf: np.ndarray, kind: str) -> FieldMatrix:
    return FieldMatrix(np.hypot(vf[..., 0], vf[..., 1]), kind)


def global_field(mf: FieldMatrix, mc: FieldMatrix, mi: FieldMatrix) -> FieldMatrix:
    if not (mf.values.shape == mc.values.shape == mi.values.shape):
        raise ValueError(
            f"field shape mismatch: {mf.values.shape} {mc.values.shape} {mi.values.shape}"
        )
    return FieldMatrix(mf.values + mc.values + mi.values, "global")


def navigation_field(
    dist: TrendDistribution,
    destination: Cell,
    env: GridEnvironment,
    params: FieldParams,
    rng_seed,
) -> tuple[FieldMatrix, DirectionField]:
    """Full per-agent pipeline: sample, interpolate, expand, propagate."""
    ss = np.random.SeedSequence(rng_seed) if isinstance(rng_seed, int) else rng_seed
    sample_seed, expand_seed = ss.spawn(2)
    points = sample_trend_points(dist, env, sample_seed)
    line = interpolate_trend_line(points, destination, env)
    raw = raw_direction_vectors(line)
    direction = expand_field(raw, line, params.r, env, expand_seed)
    return field_to_matrix(direction, destination, params, env), direction


# ---------------------------------------------------------------- exports

def _fmt(v: float) -> str:
    return f"{v:.10g}"


def write_matrix_csv(m: FieldMatrix, path: str | Path) -> None:
    """Row-major CSV: line j holds columns i = 0..width-1; +inf as `inf`."""
    w, h = m.values.shape
    with open(path, "w") as fh:
        for j in range(h):
            fh.write(",".join(_fmt(m.values[i, j]) for i in range(w)) + "\n")


def write_direction_field_csv(
    df: DirectionField, env: GridEnvironment, path: str | Path
) -> None:
    """Cells as `fx;fy`, obstacles as `OBST`, out-of-domain cells empty."""
    with open(path, "w") as fh:
        for j in range(env.height):
            row = []
            for i in range(env.width):
                if not env.is_free((i, j)):
                    row.append("OBST")
                else:
                    vec = df.vectors.get((i, j))
                    row.append("" if vec is None else f"{vec[0]};{vec[1]}")
            fh.write(",".join(row) + "\n")


def write_field_sidecar(params: FieldParams, extra: dict, path: str | Path) -> None:
    payload = {
        "delta": params.delta, "epsilon": params.epsilon,
        "lambda_o": params.lambda_o, "lambda_h": params.lambda_h,
        "r": params.r, "l": params.l, "v_0": params.v_0, "kappa": params.kappa,
    }
    payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
