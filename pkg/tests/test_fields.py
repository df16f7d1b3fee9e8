import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navfield.errors import NoPathError
from navfield.fields import (
    DirectionField,
    FieldParams,
    PedestrianSweep,
    TrendDistribution,
    astar,
    expand_field,
    field_to_matrix,
    global_field,
    interpolate_trend_line,
    magnitude_matrix,
    obstacle_field,
    path_cost,
    pedestrian_field,
    raw_direction_vectors,
    sample_trend_points,
)
from navfield.grid import discretize, grid_to_world

import oracles
from conftest import grid_from_obstacles, random_env


def trend(steps, agent_id=1, made_at=0):
    return TrendDistribution(agent_id, made_at, tuple(steps))


# ------------------------------------------------------------- sampling

def test_sample_degenerate_sigma(empty10):
    dist = trend([(1.0, 2.0, 1e-12, 1e-12, 0.5)] * 12)
    for x, y in sample_trend_points(dist, empty10, 7):
        assert abs(x - 1.0) < 1e-6 and abs(y - 2.0) < 1e-6


def test_sample_deterministic(empty10):
    dist = trend([(2.0, 2.0, 0.5, 0.5, 0.3)] * 12)
    a = sample_trend_points(dist, empty10, 42)
    b = sample_trend_points(dist, empty10, 42)
    assert a == b
    c = sample_trend_points(dist, empty10, 43)
    assert a != c


def test_sample_mean_statistics():
    env = discretize([], (-100, -100, 100, 100), 0.4)
    # 1e5 statistically identical steps drawn in one pass
    dist = trend([(1.5, -0.5, 1.0, 1.0, 0.0)] * 100_000)
    pts = np.array(sample_trend_points(dist, env, 123))
    assert abs(pts[:, 0].mean() - 1.5) < 0.02
    assert abs(pts[:, 1].mean() + 0.5) < 0.02


def test_sample_out_of_bounds_snaps_to_free_center(empty10):
    dist = trend([(50.0, 50.0, 1e-9, 1e-9, 0.0)] * 3)
    pts = sample_trend_points(dist, empty10, 0)
    assert all(p == grid_to_world((9, 9), empty10) for p in pts)


def test_trend_validation():
    with pytest.raises(ValueError):
        trend([(0, 0, 0.0, 1.0, 0.0)]).validate()
    with pytest.raises(ValueError):
        trend([(0, 0, 1.0, 1.0, 1.0)]).validate()
    with pytest.raises(ValueError):
        trend([(0, 0, 1.0, 1.0, 0.0)] * 3).validate(expected_len=12)


# ---------------------------------------------------------------- A*

def test_astar_straight(empty10):
    path = astar(empty10, (0, 0), (0, 5))
    assert len(path) == 6
    assert path_cost(path) == 5.0


def test_astar_diagonal(empty10):
    path = astar(empty10, (0, 0), (5, 5))
    assert path_cost(path) == pytest.approx(5 * math.sqrt(2), abs=1e-12)


def test_astar_matches_dijkstra_on_random_grids():
    rng = np.random.default_rng(7)
    solved = 0
    for _ in range(100):
        env = random_env(rng)
        free = env.free_cells()
        if len(free) < 2:
            continue
        start = free[int(rng.integers(len(free)))]
        goal = free[int(rng.integers(len(free)))]
        oracle = oracles.dijkstra_cost(env.passability, start, goal)
        if oracle is None:
            with pytest.raises(NoPathError):
                astar(env, start, goal)
            continue
        assert path_cost(astar(env, start, goal)) == oracle
        solved += 1
    assert solved > 50


def test_astar_errors(walled10):
    env = grid_from_obstacles(10, 10, [(5, j) for j in range(10)])
    with pytest.raises(NoPathError):
        astar(env, (0, 0), (9, 9))
    with pytest.raises(ValueError):
        astar(env, (5, 5), (0, 0))


# ------------------------------------------------------- trend line

def test_interpolate_single_cell(empty10):
    pts = [grid_to_world((3, 3), empty10)] * 4
    assert interpolate_trend_line(pts, (3, 3), empty10) == [(3, 3)]


def test_interpolate_straight(empty10):
    pts = [grid_to_world((0, 0), empty10), grid_to_world((3, 0), empty10)]
    line = interpolate_trend_line(pts, (5, 0), empty10)
    assert line == [(i, 0) for i in range(6)]


def test_interpolate_through_gap(walled10):
    pts = [grid_to_world((2, 5), walled10), grid_to_world((8, 5), walled10)]
    line = interpolate_trend_line(pts, (9, 5), walled10)
    assert (5, 5) in line  # the only gap in the wall
    for a, b in zip(line, line[1:]):
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
        assert walled10.is_free(b)
    # cost through the gap agrees with an independent Dijkstra
    expected = (
        oracles.dijkstra_cost(walled10.passability, (2, 5), (8, 5))
        + oracles.dijkstra_cost(walled10.passability, (8, 5), (9, 5))
    )
    assert path_cost(line) == pytest.approx(expected, abs=1e-12)


def test_interpolate_snaps_obstacle_points(walled10):
    # point inside the wall snaps to the nearest free cell
    pts = [grid_to_world((5, 0), walled10)]
    line = interpolate_trend_line(pts, (5, 5), walled10)
    assert all(walled10.is_free(c) for c in line)
    assert line[-1] == (5, 5)


# ------------------------------------------------- direction vectors

def test_raw_vectors_straight():
    assert raw_direction_vectors([(0, 0), (1, 0), (2, 0)]) == {
        (0, 0): (1, 0), (1, 0): (1, 0), (2, 0): (0, 0),
    }


def test_raw_vectors_diagonal_and_singleton():
    assert raw_direction_vectors([(0, 0), (1, 1)]) == {(0, 0): (1, 1), (1, 1): (0, 0)}
    assert raw_direction_vectors([(4, 4)]) == {(4, 4): (0, 0)}


def test_raw_vectors_revisit_last_wins():
    line = [(0, 0), (1, 0), (0, 0), (0, 1)]
    assert raw_direction_vectors(line)[(0, 0)] == (0, 1)


# ----------------------------------------------------------- expansion

def test_expand_single_source_ring(empty10):
    line = [(5, 5)]
    field = expand_field(raw_direction_vectors(line), line, 1, empty10, 0)
    assert field.vectors[(4, 5)] == (1, 0)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            assert field.vectors[(5 + di, 5 + dj)] == (-di, -dj)
    assert len(field.vectors) == 9


@pytest.mark.parametrize("r", [1, 2, 4])
def test_expand_counts_match_flood_fill(r):
    env = grid_from_obstacles(12, 12, [(6, 6), (7, 6)])
    line = [(2, 5), (3, 5), (4, 5)]
    field = expand_field(raw_direction_vectors(line), line, r, env, 3)
    rings = oracles.flood_fill_rounds(env.passability, set(line), r)
    expected = set(line).union(*rings)
    assert set(field.vectors) == expected
    # marks stay within r rounds of the line and respect the ring structure
    covered = set(line)
    for ring in rings:
        for cell in ring:
            assert cell in field.vectors
        covered |= ring


def test_expand_skips_obstacles():
    env = grid_from_obstacles(10, 10, [(4, 5)])
    line = [(3, 5), (3, 6)]
    field = expand_field(raw_direction_vectors(line), line, 2, env, 0)
    assert (4, 5) not in field.vectors


def test_expand_vectors_point_at_marked_cells(empty10):
    line = [(2, 2), (3, 2), (4, 2)]
    field = expand_field(raw_direction_vectors(line), line, 3, empty10, 11)
    rings = oracles.flood_fill_rounds(empty10.passability, set(line), 3)
    marked = set(line)
    for ring in rings:
        for cell in sorted(ring):
            vi, vj = field.vectors[cell]
            assert (abs(vi), abs(vj)) != (0, 0)
            assert (cell[0] + vi, cell[1] + vj) in marked
        marked |= ring


def test_expand_deterministic(empty10):
    line = [(5, 5), (6, 5)]
    raw = raw_direction_vectors(line)
    f1 = expand_field(raw, line, 3, empty10, 9)
    f2 = expand_field(raw, line, 3, empty10, 9)
    assert f1.vectors == f2.vectors


# ------------------------------------------------------ repulsion fields

def test_obstacle_field_analytic_magnitudes():
    env = grid_from_obstacles(11, 11, [(5, 5)])
    field = obstacle_field(env, delta=2.0, lambda_o=1.5)
    mags = np.hypot(field[..., 0], field[..., 1])
    assert mags[6, 5] == pytest.approx(1.5, abs=1e-9)  # |O| = delta/2
    assert mags[7, 5] == pytest.approx(0.0, abs=1e-12)  # |O| = delta
    assert mags[8, 5] == 0.0  # beyond delta
    assert math.isinf(mags[5, 5])


def test_obstacle_field_empty_scene(empty10):
    assert not obstacle_field(empty10, 1.0, 1.0).any()


def test_obstacle_field_matches_scan():
    rng = np.random.default_rng(5)
    env = random_env(rng, width=14, height=14, density=0.15)
    delta, lam = 2.5, 1.2
    field = obstacle_field(env, delta, lam)
    mags = np.hypot(field[..., 0], field[..., 1])
    table = oracles.nearest_source_scan(env.width, env.height, env.obstacle_cells())
    for i in range(env.width):
        for j in range(env.height):
            d, _ = table[(i, j)]
            expected = oracles.repulsion_magnitude(d, delta, lam)
            if math.isinf(expected):
                assert math.isinf(mags[i, j])
            else:
                assert mags[i, j] == pytest.approx(expected, abs=1e-9)


def test_pedestrian_field_no_others(empty10):
    sweeps = [PedestrianSweep(1, frozenset({(2, 2)}))]
    assert not pedestrian_field(sweeps, 1, 1.0, 1.0, empty10).any()


def test_pedestrian_field_analytic(empty10):
    sweeps = [
        PedestrianSweep(1, frozenset({(1, 1)})),
        PedestrianSweep(2, frozenset({(5, 5)})),
    ]
    field = pedestrian_field(sweeps, 1, 2.0, 0.7, empty10)
    mags = np.hypot(field[..., 0], field[..., 1])
    assert mags[5, 6] == pytest.approx(0.7, abs=1e-9)  # |H| = eps/2 from (5,5)
    assert math.isinf(mags[5, 5])
    assert mags[1, 1] == 0.0  # own sweep excluded


def test_pedestrian_field_matches_scan(empty10):
    sweeps = [
        PedestrianSweep(1, frozenset({(2, 2), (3, 2)})),
        PedestrianSweep(2, frozenset({(7, 7), (7, 8), (6, 7), (6, 8)})),
    ]
    eps, lam = 2.0, 1.0
    field = pedestrian_field(sweeps, 3, eps, lam, empty10)
    mags = np.hypot(field[..., 0], field[..., 1])
    sources = {(2, 2), (3, 2), (7, 7), (7, 8), (6, 7), (6, 8)}
    table = oracles.nearest_source_scan(10, 10, sources)
    for (i, j), (d, _) in table.items():
        expected = oracles.repulsion_magnitude(d, eps, lam)
        if math.isinf(expected):
            assert math.isinf(mags[i, j])
        else:
            assert mags[i, j] == pytest.approx(expected, abs=1e-9)


def test_kernel_rotation_symmetry():
    # one source off-center; rotating the scene 90 deg CCW ((i,j) -> (8-j, i))
    # rotates every field vector the same way ((vi,vj) -> (-vj, vi))
    env = grid_from_obstacles(9, 9, [(2, 4)])
    env_rot = grid_from_obstacles(9, 9, [(8 - 4, 2)])
    f1 = obstacle_field(env, 3.0, 1.0)
    f_rot = obstacle_field(env_rot, 3.0, 1.0)
    for i in range(9):
        for j in range(9):
            vi, vj = f1[i, j]
            ri, rj = f_rot[8 - j, i]
            if math.isinf(vi):
                assert math.isinf(ri)
                continue
            assert ri == pytest.approx(-vj, abs=1e-9)
            assert rj == pytest.approx(vi, abs=1e-9)


# -------------------------------------------------------- scalar matrices

def params(**kw):
    return FieldParams(**kw)


def test_field_matrix_hand_run(empty10):
    line = [(0, 0), (1, 0), (2, 0)]
    field = DirectionField(raw_direction_vectors(line), line, 0)
    m = field_to_matrix(field, (2, 0), params(), empty10)
    assert m.values[2, 0] == 0.0
    assert m.values[1, 0] == pytest.approx(1.0)
    assert m.values[0, 0] == pytest.approx(2.0)


def test_field_matrix_destination_minimum(empty10):
    line = [(4, 4), (5, 5)]
    field = DirectionField(raw_direction_vectors(line), line, 0)
    m = field_to_matrix(field, (5, 5), params(v_0=0.25), empty10)
    finite = m.values[np.isfinite(m.values)]
    assert m.values[5, 5] == 0.25
    assert (finite >= 0.25).all()
    assert (finite > 0.25).sum() == finite.size - 1


def test_field_matrix_obstacles_infinite(walled10):
    line = [(0, 5), (1, 5)]
    field = DirectionField(raw_direction_vectors(line), line, 0)
    m = field_to_matrix(field, (1, 5), params(), walled10)
    for cell in walled10.obstacle_cells():
        assert math.isinf(m.values[cell])


def test_field_matrix_unreachable_infinite():
    env = grid_from_obstacles(10, 10, [(5, j) for j in range(10)])
    field = DirectionField({(1, 1): (0, 0)}, [(1, 1)], 0)
    m = field_to_matrix(field, (1, 1), params(), env)
    assert math.isinf(m.values[8, 8])
    assert np.isfinite(m.values[2, 2])


def test_field_matrix_rejects_blocked_destination(walled10):
    field = DirectionField({}, [(5, 0)], 0)
    with pytest.raises(ValueError):
        field_to_matrix(field, (5, 0), params(), walled10)


def _greedy_descends_everywhere(env, m, destination):
    from navfield.grid import neighbors8

    values = m.values
    free = env.free_cells()
    for cell in free:
        if not np.isfinite(values[cell]) or cell == destination:
            continue
        smaller = [n for n in neighbors8(cell, env) if values[n] < values[cell]]
        if not smaller:
            return False
        # follow the greedy chain to the destination
        cur = cell
        for _ in range(len(free)):
            if cur == destination:
                break
            cur = min(neighbors8(cur, env), key=lambda n: values[n])
        if cur != destination:
            return False
    return True


def test_descent_soundness_sampled():
    rng = np.random.default_rng(21)
    for _ in range(8):
        env = random_env(rng, width=14, height=14, density=0.2)
        free = env.free_cells()
        dest = free[int(rng.integers(len(free)))]
        start = free[int(rng.integers(len(free)))]
        if oracles.dijkstra_cost(env.passability, start, dest) is None:
            continue
        line = astar(env, start, dest)
        field = expand_field(raw_direction_vectors(line), line, 3, env, 17)
        m = field_to_matrix(field, dest, params(), env)
        assert _greedy_descends_everywhere(env, m, dest)


def test_trend_line_bias_straight_lines(empty10):
    # straight orthogonal trend line: on-line cells beat outside-domain cells
    # at equal predecessor-chain hop counts
    line = [(i, 5) for i in range(10)]
    field = expand_field(raw_direction_vectors(line), line, 1, empty10, 0)
    m = field_to_matrix(field, (9, 5), params(), empty10)
    values = m.values
    # hop count along the line from the destination is 9 - i
    for i in range(9):
        on_line = values[i, 5]
        for (ci, cj), vec in np.ndenumerate(values):
            if (ci, cj) in field.vectors or not np.isfinite(vec):
                continue
            hops = max(abs(ci - 9), abs(cj - 5))
            if hops == 9 - i:
                assert on_line <= vec + 1e-12


def test_magnitude_matrix(empty10):
    vf = np.zeros((10, 10, 2))
    assert not magnitude_matrix(vf, "pedestrian").values.any()
    vf[3, 4] = (3.0, 4.0)
    assert magnitude_matrix(vf, "pedestrian").values[3, 4] == pytest.approx(5.0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_magnitude_matches_hypot_oracle(seed):
    rng = np.random.default_rng(seed)
    vf = rng.normal(size=(6, 6, 2))
    m = magnitude_matrix(vf, "obstacle").values
    for i in range(6):
        for j in range(6):
            assert m[i, j] == pytest.approx(math.hypot(vf[i, j, 0], vf[i, j, 1]), abs=1e-12)


def test_global_field_addition(empty10):
    rng = np.random.default_rng(2)
    from navfield.fields import FieldMatrix

    mf = FieldMatrix(rng.random((10, 10)), "navigation")
    zeros = FieldMatrix(np.zeros((10, 10)), "obstacle")
    mg = global_field(mf, zeros, FieldMatrix(np.zeros((10, 10)), "pedestrian"))
    assert np.array_equal(mg.values, mf.values)

    mc = FieldMatrix(rng.random((10, 10)), "obstacle")
    mi = FieldMatrix(rng.random((10, 10)), "pedestrian")
    mi.values[4, 4] = np.inf
    mg = global_field(mf, mc, mi)
    assert math.isinf(mg.values[4, 4])
    finite = np.isfinite(mg.values)
    assert np.allclose(
        mg.values[finite], (mf.values + mc.values + mi.values)[finite]
    )


def test_global_field_shape_mismatch(empty10):
    from navfield.fields import FieldMatrix

    a = FieldMatrix(np.zeros((10, 10)), "navigation")
    b = FieldMatrix(np.zeros((9, 10)), "obstacle")
    with pytest.raises(ValueError):
        global_field(a, b, a)
