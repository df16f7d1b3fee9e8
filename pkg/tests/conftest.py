import numpy as np
import pytest

from navfield.grid import FREE, OBSTACLE, GridEnvironment, discretize


@pytest.fixture
def empty10():
    return discretize([], (0.0, 0.0, 4.0, 4.0), 0.4)


@pytest.fixture
def walled10():
    # vertical wall at i=5 with a one-cell gap at j=5
    return grid_from_obstacles(10, 10, [(5, j) for j in range(10) if j != 5])


def grid_from_obstacles(width, height, obstacle_cells, cell_size=0.4):
    passability = np.full((width, height), FREE, dtype=np.uint8)
    for i, j in obstacle_cells:
        passability[i, j] = OBSTACLE
    return GridEnvironment(width, height, cell_size, (0.0, 0.0), passability)


def random_env(rng, width=20, height=20, density=0.2, cell_size=0.4):
    passability = (rng.random((width, height)) >= density).astype(np.uint8)
    return GridEnvironment(width, height, cell_size, (0.0, 0.0), passability)
