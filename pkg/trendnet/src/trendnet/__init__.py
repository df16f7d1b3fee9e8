"""Physics-informed spatio-temporal graph network for pedestrian movement
trends, exchanged with the crowd simulator through JSONL files."""

__version__ = "0.1.0"

from .data import Window, extract_windows
from .export import export_trends, predict_trends, read_history, serve_lockstep, write_trends
from .graphs import adjacency, build_graphs, normalized_adjacency
from .losses import loss_f, loss_p, loss_v, total_loss
from .model import (
    TrendSTGCN,
    VelocitySurrogate,
    gcn_layer,
    load_checkpoint,
    save_checkpoint,
    tcn_layer,
)
from .train import TrainConfig, train, window_losses, window_tensors
