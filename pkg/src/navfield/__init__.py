"""Grid-based crowd simulation guided by predicted-trend navigation fields."""

__version__ = "0.1.0"

from .agents import ACTIVE, ARRIVED, WAIT, Agent, execute, plan_step, sense, sweep_cells
from .dataset import (
    AgentSeed,
    ExtractionResult,
    TrajectoryDataset,
    extract_agents,
    load_trajectories,
    resample,
)
from .errors import NoPathError, ParseError, PredictorUnavailableError
from .fields import (
    DirectionField,
    FieldMatrix,
    FieldParams,
    PedestrianSweep,
    TrendDistribution,
    astar,
    expand_field,
    field_to_matrix,
    global_field,
    interpolate_trend_line,
    magnitude_matrix,
    navigation_field,
    obstacle_field,
    path_cost,
    pedestrian_field,
    raw_direction_vectors,
    sample_trend_points,
)
from .grid import (
    GridEnvironment,
    discretize,
    grid_to_world,
    load_scene,
    neighbors8,
    save_scene,
    world_to_grid,
)
from .metrics import ade, heatmap, jaccard_similarity, kde_export, travel_stats
from .predictor import (
    BaselinePredictor,
    HistorySnapshot,
    LockstepPredictor,
    PredictorKind,
    SnapshotEntry,
    TrendFilePredictor,
)
from .sim import SimConfig, WorldState, agents_from_seeds, init_world, make_agent, run, step
