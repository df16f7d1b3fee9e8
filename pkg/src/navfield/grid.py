"""Square-cell discretization of the walkable world.

Cells are addressed as (i, j) = (column, row). Cell (i, j) covers the world
rectangle [origin_x + i*cell, origin_x + (i+1)*cell) x [origin_y + j*cell, ...),
and free cells are 8-connected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

Cell = tuple[int, int]
Point = tuple[float, float]

# Fixed scan order for the 8 neighbors; downstream tie-breaking relies on it.
NEIGHBOR_OFFSETS: tuple[Cell, ...] = (
    (-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1),
)

FREE = 1
OBSTACLE = 0


@dataclass(frozen=True)
class GridEnvironment:
    """Immutable discretized environment.

    passability is indexed [i, j] with 1 = free, 0 = obstacle.
    """

    width: int
    height: int
    cell_size: float
    origin: Point
    passability: np.ndarray

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if self.passability.shape != (self.width, self.height):
            raise ValueError(
                f"passability shape {self.passability.shape} != "
                f"({self.width}, {self.height})"
            )
        if not np.isin(self.passability, (OBSTACLE, FREE)).all():
            raise ValueError("passability entries must be 0 or 1")
        self.passability.setflags(write=False)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return (ox, oy, ox + self.width * self.cell_size, oy + self.height * self.cell_size)

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_free(self, c: Cell) -> bool:
        return self.in_bounds(c) and self.passability[c[0], c[1]] == FREE

    def obstacle_cells(self) -> list[Cell]:
        ii, jj = np.nonzero(self.passability == OBSTACLE)
        return [(int(i), int(j)) for i, j in zip(ii, jj)]

    def free_cells(self) -> list[Cell]:
        ii, jj = np.nonzero(self.passability == FREE)
        return [(int(i), int(j)) for i, j in zip(ii, jj)]


def _cell_count(span: float, cell_size: float) -> int:
    # ceil with a tolerance so spans that are float-noisy multiples of the
    # cell size do not gain a spurious extra cell
    return int(math.ceil(span / cell_size - 1e-9))


def discretize(
    obstacle_shapes: list[tuple[float, float, float, float]],
    bounds: tuple[float, float, float, float],
    cell_size: float,
) -> GridEnvironment:
    """Discretize a rectangular world into a grid, marking obstacle cells.

    A cell is an obstacle iff its open interior overlaps any obstacle
    rectangle's interior, so geometry that only touches a cell edge does not
    block the cell.
    """
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    xmin, ymin, xmax, ymax = bounds
    if xmax - xmin < cell_size - 1e-9 or ymax - ymin < cell_size - 1e-9:
        raise ValueError("bounds must cover at least one cell")
    width = _cell_count(xmax - xmin, cell_size)
    height = _cell_count(ymax - ymin, cell_size)
    passability = np.full((width, height), FREE, dtype=np.uint8)
    for ox0, oy0, ox1, oy1 in obstacle_shapes:
        if ox1 <= ox0 or oy1 <= oy0:
            continue
        # candidate index ranges, then exact open-interval overlap test
        i_lo = max(0, int(math.floor((ox0 - xmin) / cell_size)))
        i_hi = min(width - 1, int(math.floor((ox1 - xmin) / cell_size)))
        j_lo = max(0, int(math.floor((oy0 - ymin) / cell_size)))
        j_hi = min(height - 1, int(math.floor((oy1 - ymin) / cell_size)))
        for i in range(i_lo, i_hi + 1):
            cx0 = xmin + i * cell_size
            cx1 = cx0 + cell_size
            if not (cx0 < ox1 and ox0 < cx1):
                continue
            for j in range(j_lo, j_hi + 1):
                cy0 = ymin + j * cell_size
                cy1 = cy0 + cell_size
                if cy0 < oy1 and oy0 < cy1:
                    passability[i, j] = OBSTACLE
    return GridEnvironment(width, height, cell_size, (xmin, ymin), passability)


def world_to_grid(p: Point, env: GridEnvironment) -> Cell:
    i = int(math.floor((p[0] - env.origin[0]) / env.cell_size))
    j = int(math.floor((p[1] - env.origin[1]) / env.cell_size))
    if not env.in_bounds((i, j)):
        raise ValueError(f"point {p} outside grid bounds {env.bounds}")
    return (i, j)


def grid_to_world(c: Cell, env: GridEnvironment) -> Point:
    if not env.in_bounds(c):
        raise ValueError(f"cell {c} out of range for {env.width}x{env.height} grid")
    return (
        env.origin[0] + (c[0] + 0.5) * env.cell_size,
        env.origin[1] + (c[1] + 0.5) * env.cell_size,
    )


def neighbors8(c: Cell, env: GridEnvironment) -> list[Cell]:
    """Free in-bounds neighbors of a free cell, in the fixed offset order."""
    if not env.in_bounds(c):
        raise ValueError(f"cell {c} out of range")
    if not env.is_free(c):
        raise ValueError(f"cell {c} is an obstacle")
    out = []
    for di, dj in NEIGHBOR_OFFSETS:
        n = (c[0] + di, c[1] + dj)
        if env.is_free(n):
            out.append(n)
    return out


def nearest_free_cell(p: Point, env: GridEnvironment) -> Cell:
    """Free cell whose center is closest to p (ties: lowest (i, j))."""
    free = np.argwhere(env.passability == FREE)
    if free.size == 0:
        raise ValueError("grid has no free cells")
    cx = env.origin[0] + (free[:, 0] + 0.5) * env.cell_size
    cy = env.origin[1] + (free[:, 1] + 0.5) * env.cell_size
    d2 = (cx - p[0]) ** 2 + (cy - p[1]) ** 2
    order = np.lexsort((free[:, 1], free[:, 0], d2))
    i, j = free[order[0]]
    return (int(i), int(j))


def load_scene(path: str | Path) -> GridEnvironment:
    """Load a scene JSON: bounds [xmin, ymin, xmax, ymax], cell_size, obstacles."""
    with open(path) as f:
        data = json.load(f)
    try:
        bounds = tuple(float(v) for v in data["bounds"])
        cell_size = float(data["cell_size"])
        obstacles = [tuple(float(v) for v in rect) for rect in data.get("obstacles", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scene file {path}: {exc}") from exc
    if len(bounds) != 4 or any(len(r) != 4 for r in obstacles):
        raise ValueError(f"malformed scene file {path}: rectangles need 4 numbers")
    return discretize(obstacles, bounds, cell_size)  # type: ignore[arg-type]


def save_scene(
    path: str | Path,
    bounds: tuple[float, float, float, float],
    cell_size: float,
    obstacles: list[tuple[float, float, float, float]],
) -> None:
    with open(path, "w") as f:
        json.dump(
            {"bounds": list(bounds), "cell_size": cell_size,
             "obstacles": [list(r) for r in obstacles]},
            f, indent=2,
        )
