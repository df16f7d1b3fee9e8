"""Top-level simulation loop.

Each step: agents plan against their cached global field and move in
ascending id order (live occupancy excludes contested cells), arrived agents
leave the crowd, the pedestrian field is rebuilt from this step's sweeps,
trends are re-predicted every data-driven period, and every agent's global
field is re-summed.
"""

from __future__ import annotations

import csv
import json
import time
from collections import deque
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .agents import ARRIVED, Agent, execute, plan_step, sweep_cells
from .dataset import AgentSeed
from .errors import NoPathError
from .fields import (
    DirectionField,
    FieldMatrix,
    FieldParams,
    PedestrianSweep,
    expand_field,
    field_to_matrix,
    global_field,
    magnitude_matrix,
    navigation_field,
    obstacle_field,
    pedestrian_field,
    raw_direction_vectors,
)
from .grid import Cell, GridEnvironment, grid_to_world, world_to_grid
from .predictor import (
    HistorySnapshot,
    PredictorKind,
    SnapshotEntry,
    make_predictor,
)

TrajectoryRow = tuple[int, int, float, float, str]  # step, agent_id, x, y, state


@dataclass
class SimConfig:
    dt: float = 0.4
    t_p: int = 12
    t_d: int = 6
    h_obs: int = 8
    max_steps: int = 500
    seed: int = 0
    field_params: FieldParams = dc_field(default_factory=FieldParams)
    predictor: PredictorKind = dc_field(default_factory=lambda: PredictorKind("baseline"))

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (1 <= self.t_d <= self.t_p):
            raise ValueError(f"t_d must satisfy 1 <= t_d <= t_p, got {self.t_d}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.h_obs < 1:
            raise ValueError("h_obs must be at least 1")

    def to_dict(self) -> dict:
        return {
            "dt": self.dt, "t_p": self.t_p, "t_d": self.t_d, "h_obs": self.h_obs,
            "max_steps": self.max_steps, "seed": self.seed,
            "field_params": {
                "delta": self.field_params.delta, "epsilon": self.field_params.epsilon,
                "lambda_o": self.field_params.lambda_o, "lambda_h": self.field_params.lambda_h,
                "r": self.field_params.r, "l": self.field_params.l,
                "v_0": self.field_params.v_0, "kappa": self.field_params.kappa,
            },
            "predictor": {
                "mode": self.predictor.mode, "path": self.predictor.path,
                "timeout": self.predictor.timeout,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        kwargs = {k: data[k] for k in ("dt", "t_p", "t_d", "h_obs", "max_steps", "seed")
                  if k in data}
        if "field_params" in data:
            kwargs["field_params"] = FieldParams(**data["field_params"])
        if "predictor" in data:
            kwargs["predictor"] = PredictorKind(**data["predictor"])
        return cls(**kwargs)


def _mask32(v: int) -> int:
    return v & 0xFFFFFFFF


class WorldState:
    """Mutable simulation state; one logical writer."""

    def __init__(self, env: GridEnvironment, config: SimConfig):
        self.env = env
        self.config = config
        self.step_no = 0
        self.crowd: dict[int, Agent] = {}
        self.pending: dict[int, Agent] = {}
        self.arrived: dict[int, Agent] = {}
        self.m_c = magnitude_matrix(
            obstacle_field(env, config.field_params.delta, config.field_params.lambda_o),
            "obstacle",
        )
        self.m_f: dict[int, FieldMatrix] = {}
        self.m_i: dict[int, FieldMatrix] = {}
        self.m_g: dict[int, FieldMatrix] = {}
        self.direction: dict[int, DirectionField] = {}
        self.sweeps: dict[int, PedestrianSweep] = {}
        self.trajectory: list[TrajectoryRow] = []
        self.predictor = make_predictor(config.predictor, config.t_p, config.dt)

    # ----------------------------------------------------------- helpers

    def _trend_seed(self, cycle: int, agent_id: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            (_mask32(self.config.seed), _mask32(cycle), _mask32(agent_id))
        )

    def _snapshot_entry(self, agent: Agent) -> SnapshotEntry:
        positions = list(agent.history)
        while len(positions) < self.config.h_obs:
            positions.insert(0, positions[0])
        return SnapshotEntry(
            agent_id=agent.id,
            positions=tuple(positions),
            destination=agent.destination,
            preferred_speed=agent.preferred_speed,
        )

    def snapshot(self, cycle: int) -> HistorySnapshot:
        entries = tuple(
            self._snapshot_entry(self.crowd[i]) for i in sorted(self.crowd)
        )
        return HistorySnapshot(cycle=cycle, step=self.step_no, entries=entries)

    def _rebuild_nav(self, agent_id: int, trend, cycle: int) -> None:
        agent = self.crowd[agent_id]
        trend.validate(self.config.t_p)
        params = self.config.field_params
        try:
            m_f, direction = navigation_field(
                trend, agent.destination, self.env, params,
                self._trend_seed(cycle, agent_id),
            )
        except NoPathError:
            # trend cells cannot reach the destination: collapse the line to
            # the destination cell; unreachable regions stay +inf and the
            # agent waits out the run
            line = [agent.destination]
            direction = expand_field(
                raw_direction_vectors(line), line, params.r, self.env,
                self._trend_seed(cycle, agent_id),
            )
            m_f = field_to_matrix(direction, agent.destination, params, self.env)
        self.m_f[agent_id] = m_f
        self.direction[agent_id] = direction

    def _rebuild_m_i(self, agent_id: int) -> None:
        vf = pedestrian_field(
            list(self.sweeps.values()), agent_id,
            self.config.field_params.epsilon, self.config.field_params.lambda_h,
            self.env,
        )
        self.m_i[agent_id] = magnitude_matrix(vf, "pedestrian")

    def _rebuild_m_g(self, agent_id: int) -> None:
        self.m_g[agent_id] = global_field(
            self.m_f[agent_id], self.m_c, self.m_i[agent_id]
        )

    def _log(self, agent: Agent) -> None:
        x, y = agent.world_pos
        self.trajectory.append((self.step_no, agent.id, x, y, agent.state))

    def _retire(self, agent: Agent) -> None:
        self.arrived[agent.id] = agent
        self.crowd.pop(agent.id, None)
        for cache in (self.m_f, self.m_i, self.m_g, self.direction, self.sweeps):
            cache.pop(agent.id, None)

    def all_done(self) -> bool:
        return not self.crowd and not self.pending


def init_world(env: GridEnvironment, agents: list[Agent], config: SimConfig) -> WorldState:
    """Validate placement, build static and initial fields, log step 0."""
    world = WorldState(env, config)
    seen_ids: set[int] = set()
    seen_cells: set[Cell] = set()
    for agent in agents:
        if agent.id in seen_ids:
            raise ValueError(f"duplicate agent id {agent.id}")
        if not env.is_free(agent.cell):
            raise ValueError(f"agent {agent.id} starts on a blocked cell {agent.cell}")
        if agent.cell in seen_cells:
            raise ValueError(f"agents share start cell {agent.cell}")
        if not env.is_free(agent.destination):
            raise ValueError(f"agent {agent.id} destination {agent.destination} is blocked")
        seen_ids.add(agent.id)
        seen_cells.add(agent.cell)
    logged: list[Agent] = []
    for agent in sorted(agents, key=lambda a: a.id):
        if agent.spawn_step > 0:
            world.pending[agent.id] = agent
            continue
        logged.append(agent)
        if agent.cell == agent.destination:
            agent.state = ARRIVED
            world.arrived[agent.id] = agent
        else:
            world.crowd[agent.id] = agent

    world.sweeps = {
        i: PedestrianSweep(i, frozenset({world.crowd[i].cell}))
        for i in sorted(world.crowd)
    }
    if world.crowd:
        trends = world.predictor.predict(world.snapshot(cycle=0), env)
        for agent_id in sorted(world.crowd):
            world._rebuild_nav(agent_id, trends[agent_id], cycle=0)
            world._rebuild_m_i(agent_id)
            world._rebuild_m_g(agent_id)
    for agent in sorted(logged, key=lambda a: a.id):
        world._log(agent)
    return world


def _spawn_due(world: WorldState) -> set[int]:
    """Activate agents whose spawn step has come (postponed if their cell is
    taken). They are logged where they stand and start moving next step."""
    occupied = {a.cell for a in world.crowd.values()}
    cycle = world.step_no // world.config.t_d
    spawned: set[int] = set()
    for agent_id in sorted(world.pending):
        agent = world.pending[agent_id]
        if agent.spawn_step > world.step_no:
            continue
        if agent.cell in occupied:
            continue  # retry next step
        del world.pending[agent_id]
        if agent.cell == agent.destination:
            agent.state = ARRIVED
            world._log(agent)
            world.arrived[agent_id] = agent
            continue
        world.crowd[agent_id] = agent
        occupied.add(agent.cell)
        trend = world.predictor.predict_single(
            world._snapshot_entry(agent), world.env, world.step_no
        )
        world._rebuild_nav(agent_id, trend, cycle)
        world._rebuild_m_i(agent_id)
        world._rebuild_m_g(agent_id)
        world._log(agent)
        spawned.add(agent_id)
    return spawned


def step(world: WorldState) -> WorldState:
    """Advance the world by one timestep."""
    config = world.config
    world.step_no += 1
    row_mark = len(world.trajectory)
    spawned_now = _spawn_due(world)

    new_sweeps: dict[int, PedestrianSweep] = {}
    swept_this_step: set[Cell] = set()
    for agent_id in sorted(world.crowd):
        agent = world.crowd[agent_id]
        if agent_id in spawned_now:
            cells = frozenset({agent.cell})
            new_sweeps[agent_id] = PedestrianSweep(agent_id, cells)
            swept_this_step |= cells
            continue
        occupied = {
            other.cell for other in world.crowd.values() if other.id != agent_id
        } | swept_this_step
        target = plan_step(agent, world.m_g[agent_id].values, occupied, world.env)
        old_cell = agent.cell
        execute(agent, target, config.dt, world.env)
        world._log(agent)
        if agent.state == ARRIVED:
            world._retire(agent)
            continue
        cells = sweep_cells(old_cell, agent.cell, world.env)
        new_sweeps[agent_id] = PedestrianSweep(agent_id, cells)
        swept_this_step |= cells

    world.sweeps = new_sweeps
    world.trajectory[row_mark:] = sorted(world.trajectory[row_mark:], key=lambda r: r[1])
    for agent_id in sorted(world.crowd):
        world._rebuild_m_i(agent_id)

    if world.step_no % config.t_d == 0 and world.crowd:
        cycle = world.step_no // config.t_d
        trends = world.predictor.predict(world.snapshot(cycle), world.env)
        for agent_id in sorted(world.crowd):
            if agent_id in trends:
                world._rebuild_nav(agent_id, trends[agent_id], cycle)

    for agent_id in sorted(world.crowd):
        world._rebuild_m_g(agent_id)
    return world


def run(world: WorldState) -> dict:
    """Step until everyone arrived or the step budget is spent."""
    t0 = time.perf_counter()
    while not world.all_done() and world.step_no < world.config.max_steps:
        step(world)
    wall = time.perf_counter() - t0

    per_agent = {}
    positions: dict[int, list[tuple[float, float]]] = {}
    for _, agent_id, x, y, _ in world.trajectory:
        positions.setdefault(agent_id, []).append((x, y))
    for agent_id, pts in sorted(positions.items()):
        dist = sum(
            ((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2) ** 0.5
            for a, b in zip(pts, pts[1:])
        )
        steps_present = max(len(pts) - 1, 1)
        per_agent[agent_id] = {
            "distance_m": dist,
            "mean_speed_mps": dist / (steps_present * world.config.dt),
        }
    return {
        "steps": world.step_no,
        "agents_total": len(world.arrived) + len(world.crowd) + len(world.pending),
        "agents_arrived": len(world.arrived),
        "agents_active": len(world.crowd),
        "agents_never_spawned": len(world.pending),
        "per_agent": per_agent,
        "wall_clock_s": wall,
    }


# -------------------------------------------------------------- agent setup

def make_agent(
    agent_id: int,
    start: Cell,
    destination: Cell,
    speed: float,
    env: GridEnvironment,
    h_obs: int = 8,
    spawn_step: int = 0,
) -> Agent:
    pos = grid_to_world(start, env)
    return Agent(
        id=agent_id, cell=start, world_pos=pos, destination=destination,
        preferred_speed=speed, history=deque([pos], maxlen=h_obs),
        spawn_step=spawn_step,
    )


def agents_from_seeds(
    seeds: list[AgentSeed] | tuple[AgentSeed, ...],
    env: GridEnvironment,
    config: SimConfig,
) -> list[Agent]:
    agents = []
    for seed in seeds:
        history = deque(seed.observed, maxlen=config.h_obs)
        start_pos = seed.observed[-1]
        cell = seed.start_cell
        if world_to_grid(start_pos, env) != cell:
            # relocated during duplicate resolution: stand at the cell center
            start_pos = grid_to_world(cell, env)
            history.append(start_pos)
        agents.append(Agent(
            id=seed.id, cell=cell, world_pos=start_pos,
            destination=seed.destination, preferred_speed=seed.preferred_speed,
            history=history, spawn_step=seed.spawn_step,
        ))
    return agents


# ------------------------------------------------------------------- files

def write_trajectory_csv(rows: list[TrajectoryRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "agent_id", "x", "y", "state"])
        for step_no, agent_id, x, y, state in rows:
            writer.writerow([step_no, agent_id, f"{x:.10g}", f"{y:.10g}", state])


def read_trajectory_csv(path: str | Path) -> list[TrajectoryRow]:
    rows: list[TrajectoryRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["step", "agent_id", "x", "y"]:
            raise ValueError(f"{path}: not a trajectory CSV")
        for rec in reader:
            if not rec:
                continue
            state = rec[4] if len(rec) > 4 else ""
            rows.append((int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3]), state))
    return rows


def write_summary_json(summary: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
