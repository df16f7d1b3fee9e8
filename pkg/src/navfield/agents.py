"""Agent state and the sense -> plan -> execute cycle.

Movement is semi-continuous: agents hop between cell centers, gated by a
distance budget that accumulates at their preferred speed each step, so
continuous speeds coexist with the discrete grid.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field
from typing import Final

import numpy as np

from .fields import SQRT2, FieldMatrix
from .grid import Cell, GridEnvironment, Point, grid_to_world, neighbors8

WAIT: Final = None

ACTIVE = "active"
ARRIVED = "arrived"


@dataclass
class Agent:
    id: int
    cell: Cell
    world_pos: Point
    destination: Cell
    preferred_speed: float
    velocity: tuple[float, float] = (0.0, 0.0)
    movement_budget: float = 0.0
    history: deque = dc_field(default_factory=lambda: deque(maxlen=8))
    state: str = ACTIVE
    spawn_step: int = 0

    def __post_init__(self):
        if self.preferred_speed <= 0:
            raise ValueError(f"agent {self.id}: preferred_speed must be positive")
        if not self.history:
            self.history.append(self.world_pos)


@dataclass(frozen=True)
class SpatioTemporalInfo:
    """What one agent perceives this step: the static environment, a snapshot
    of the active crowd, and its own navigation matrix."""

    env: GridEnvironment
    crowd: tuple[tuple[int, Cell, tuple[float, float]], ...]
    nav: FieldMatrix


def sense(agent: Agent, env: GridEnvironment, agents: dict[int, Agent],
          nav: FieldMatrix) -> SpatioTemporalInfo:
    crowd = tuple(
        (a.id, a.cell, a.velocity)
        for a in sorted(agents.values(), key=lambda a: a.id)
        if a.state == ACTIVE
    )
    return SpatioTemporalInfo(env=env, crowd=crowd, nav=nav)


def plan_step(
    agent: Agent,
    mg: np.ndarray,
    occupied: set[Cell],
    env: GridEnvironment,
) -> Cell | None:
    """Pick the unoccupied free neighbor with the lowest potential.

    The move happens when it descends, or when the agent is not at a local
    minimum of the field (its cheapest cells may just be occupied right now).
    Returns WAIT when boxed in or when every candidate is impassable.
    """
    here = mg[agent.cell]
    free = neighbors8(agent.cell, env)
    candidates = [n for n in free if n not in occupied]
    if not candidates:
        return WAIT
    best = min(candidates, key=lambda n: mg[n])  # min is stable: first wins ties
    if not np.isfinite(mg[best]):
        return WAIT
    if mg[best] < here or any(mg[n] < here for n in free):
        return best
    return WAIT


def step_cost(old: Cell, new: Cell, cell_size: float) -> float:
    if old[0] != new[0] and old[1] != new[1]:
        return SQRT2 * cell_size
    return cell_size


def execute(agent: Agent, target: Cell | None, dt: float, env: GridEnvironment) -> Agent:
    """Apply the planned move if the distance budget covers it."""
    cap = 2.0 * env.cell_size * SQRT2
    agent.movement_budget = min(agent.movement_budget + agent.preferred_speed * dt, cap)
    if target is not WAIT:
        di = abs(target[0] - agent.cell[0])
        dj = abs(target[1] - agent.cell[1])
        if max(di, dj) != 1:
            raise ValueError(f"target {target} is not adjacent to {agent.cell}")
        cost = step_cost(agent.cell, target, env.cell_size)
        if agent.movement_budget >= cost:
            new_pos = grid_to_world(target, env)
            agent.velocity = (
                (new_pos[0] - agent.world_pos[0]) / dt,
                (new_pos[1] - agent.world_pos[1]) / dt,
            )
            agent.cell = target
            agent.world_pos = new_pos
            agent.movement_budget -= cost
        else:
            agent.velocity = (0.0, 0.0)
    else:
        agent.velocity = (0.0, 0.0)
    agent.history.append(agent.world_pos)
    if agent.cell == agent.destination:
        agent.state = ARRIVED
    return agent


def sweep_cells(old: Cell, new: Cell, env: GridEnvironment) -> frozenset[Cell]:
    """Cells touched while moving old -> new (supercover of the segment).

    A diagonal hop also brushes the two orthogonal corner cells.
    """
    cells = {old, new}
    if old[0] != new[0] and old[1] != new[1]:
        cells.add((old[0], new[1]))
        cells.add((new[0], old[1]))
    return frozenset(c for c in cells if env.in_bounds(c))
