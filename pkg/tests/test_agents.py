import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navfield.agents import (
    ARRIVED,
    WAIT,
    Agent,
    execute,
    plan_step,
    sense,
    sweep_cells,
)
from navfield.fields import FieldMatrix
from navfield.grid import NEIGHBOR_OFFSETS, grid_to_world

import oracles
from conftest import grid_from_obstacles


def agent_at(cell, env, dest=(9, 9), speed=1.0, agent_id=1):
    return Agent(
        id=agent_id, cell=cell, world_pos=grid_to_world(cell, env),
        destination=dest, preferred_speed=speed,
        history=deque([grid_to_world(cell, env)], maxlen=8),
    )


def mg_with(env, center, neighbor_values, here=100.0):
    values = np.full((env.width, env.height), 50.0)
    values[center] = here
    for (di, dj), v in zip(NEIGHBOR_OFFSETS, neighbor_values):
        values[center[0] + di, center[1] + dj] = v
    return values


def test_plan_step_argmin(empty10):
    agent = agent_at((5, 5), empty10)
    values = mg_with(empty10, (5, 5), [3, 2, 5, 7, 4, 9, 6, 8])
    target = plan_step(agent, values, set(), empty10)
    assert values[target] == 2
    assert target == (5 - 1, 5 + 0)  # second offset in the fixed order


def test_plan_step_tie_break(empty10):
    agent = agent_at((5, 5), empty10)
    values = mg_with(empty10, (5, 5), [4, 2, 5, 2, 4, 9, 6, 8])
    # two neighbors tied at 2 -> the earlier offset (-1, 0) wins
    assert plan_step(agent, values, set(), empty10) == (4, 5)


def test_plan_step_all_infinite(empty10):
    agent = agent_at((5, 5), empty10)
    values = mg_with(empty10, (5, 5), [math.inf] * 8)
    assert plan_step(agent, values, set(), empty10) is WAIT


def test_plan_step_all_occupied(empty10):
    agent = agent_at((5, 5), empty10)
    values = mg_with(empty10, (5, 5), [1] * 8)
    occupied = {(5 + di, 5 + dj) for di, dj in NEIGHBOR_OFFSETS}
    assert plan_step(agent, values, occupied, empty10) is WAIT


def test_plan_step_waits_at_local_minimum(empty10):
    agent = agent_at((5, 5), empty10)
    values = mg_with(empty10, (5, 5), [5, 6, 7, 8, 9, 10, 11, 12], here=1.0)
    assert plan_step(agent, values, set(), empty10) is WAIT


def test_plan_step_sidesteps_when_descent_blocked(empty10):
    # the only descending neighbor is occupied; the agent is not at a local
    # minimum, so it takes the best available cell even though it is uphill
    agent = agent_at((5, 5), empty10)
    values = mg_with(empty10, (5, 5), [3, 2, 5, 7, 4, 9, 6, 8], here=4.0)
    occupied = {(4, 5), (4, 4)}  # blocks the 2 and the 3
    target = plan_step(agent, values, occupied, empty10)
    assert target == (5, 6)  # the 4, though it does not descend from here=4.0
    assert values[target] == min(
        values[5 + di, 5 + dj]
        for di, dj in NEIGHBOR_OFFSETS
        if (5 + di, 5 + dj) not in occupied
    )


def test_execute_orthogonal_full_speed(empty10):
    agent = agent_at((0, 0), empty10, dest=(0, 9), speed=1.0)
    for step_no in range(1, 6):
        execute(agent, (0, step_no), 0.4, empty10)
        assert agent.cell == (0, step_no)
        assert agent.movement_budget == pytest.approx(0.0, abs=1e-12)
    assert agent.velocity == pytest.approx((0.0, 1.0))


def test_execute_diagonal_budget_schedule(empty10):
    # independently simulate the budget recurrence, then replay it
    diag_cost = math.sqrt(2) * 0.4
    expected_steps = oracles.budget_moves(1.0, 0.4, [diag_cost] * 10,
                                          cap=2 * 0.4 * math.sqrt(2))
    assert expected_steps == [2, 3, 5, 6, 8, 9, 10]  # frozen from the oracle

    agent = agent_at((0, 0), empty10, dest=(9, 9), speed=1.0)
    moved = []
    for step_no in range(1, 11):
        before = agent.cell
        target = (before[0] + 1, before[1] + 1)
        execute(agent, target, 0.4, empty10)
        if agent.cell != before:
            moved.append(step_no)
    assert moved == expected_steps
    assert len(moved) == 7


def test_execute_wait_zero_velocity(empty10):
    agent = agent_at((3, 3), empty10)
    agent.velocity = (1.0, 0.0)
    execute(agent, WAIT, 0.4, empty10)
    assert agent.velocity == (0.0, 0.0)
    assert agent.cell == (3, 3)
    assert len(agent.history) == 2


def test_execute_budget_cap(empty10):
    agent = agent_at((3, 3), empty10, speed=5.0)
    for _ in range(10):
        execute(agent, WAIT, 0.4, empty10)
    assert agent.movement_budget == pytest.approx(2 * 0.4 * math.sqrt(2))


def test_execute_arrival(empty10):
    agent = agent_at((4, 4), empty10, dest=(4, 5), speed=2.0)
    execute(agent, (4, 5), 0.4, empty10)
    assert agent.state == ARRIVED


def test_execute_rejects_non_adjacent(empty10):
    agent = agent_at((4, 4), empty10)
    with pytest.raises(ValueError):
        execute(agent, (6, 4), 0.4, empty10)
    with pytest.raises(ValueError):
        execute(agent, (4, 4), 0.4, empty10)


def test_sweep_cells(empty10):
    assert sweep_cells((3, 3), (3, 3), empty10) == {(3, 3)}
    assert sweep_cells((0, 0), (1, 0), empty10) == {(0, 0), (1, 0)}
    diagonal = sweep_cells((0, 0), (1, 1), empty10)
    assert diagonal == oracles.supercover((0, 0), (1, 1))
    assert diagonal == {(0, 0), (1, 1), (1, 0), (0, 1)}


def test_sweep_cells_orthogonal_matches_supercover(empty10):
    for old, new in [((2, 2), (2, 3)), ((2, 2), (3, 2)), ((5, 5), (4, 4))]:
        assert sweep_cells(old, new, empty10) == oracles.supercover(old, new)


def test_sweep_cells_in_bounds():
    env = grid_from_obstacles(3, 3, [])
    # corner cells of a diagonal move at the grid edge stay in bounds
    assert sweep_cells((0, 0), (1, 1), env) == {(0, 0), (1, 1), (0, 1), (1, 0)}


@settings(max_examples=40, deadline=None)
@given(
    speed=st.floats(0.2, 3.0),
    moves=st.lists(st.sampled_from([(0, 1), (1, 0), (1, 1), (0, -1)]), min_size=1, max_size=30),
)
def test_speed_bound(speed, moves):
    env = grid_from_obstacles(80, 80, [])
    start = (40, 40)
    agent = Agent(
        id=1, cell=start, world_pos=grid_to_world(start, env),
        destination=(0, 0), preferred_speed=speed,
        history=deque([grid_to_world(start, env)], maxlen=8),
    )
    dt = 0.4
    total = 0.0
    for delta in moves:
        before = agent.world_pos
        target = (agent.cell[0] + delta[0], agent.cell[1] + delta[1])
        execute(agent, target, dt, env)
        total += math.hypot(agent.world_pos[0] - before[0], agent.world_pos[1] - before[1])
    cap = 2 * env.cell_size * math.sqrt(2)
    assert total <= speed * len(moves) * dt + cap + 1e-9


def test_sense_snapshot(empty10):
    a1 = agent_at((1, 1), empty10, agent_id=1)
    a2 = agent_at((2, 2), empty10, agent_id=2)
    a3 = agent_at((3, 3), empty10, agent_id=3)
    a3.state = ARRIVED
    nav = FieldMatrix(np.zeros((10, 10)), "global")
    info = sense(a1, empty10, {1: a1, 2: a2, 3: a3}, nav)
    assert [entry[0] for entry in info.crowd] == [1, 2]
    assert info.crowd[1][1] == (2, 2)
