"""Training loop: plain SGD over the weighted three-part objective, per-epoch
loss logging, checkpointing, and a NaN tripwire."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch

from .data import Window
from .graphs import build_graphs
from .losses import loss_f, loss_p, loss_v
from .model import TrendSTGCN, save_checkpoint


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.005
    dt: float = 0.4
    w_p: float = 1.0
    w_f: float = 0.1
    w_v: float = 0.1
    seed: int = 0
    hidden: int = 32
    grad_clip: float = 5.0
    log_path: str | None = None
    checkpoint_path: str | None = None


def window_tensors(window: Window, dt: float, dtype=torch.float32):
    disp, vel, adj = build_graphs(window.obs, dt, window.prev)
    fut = torch.as_tensor(window.fut, dtype=dtype)
    last_pos = torch.as_tensor(window.obs[-1], dtype=dtype)
    last_vel = torch.as_tensor(vel[-1], dtype=dtype)
    prev_fut = torch.cat([last_pos[None], fut[:-1]], dim=0)
    fut_vel = (fut - prev_fut) / dt
    return {
        "disp": torch.as_tensor(disp, dtype=dtype),
        "adj": torch.as_tensor(adj, dtype=dtype),
        "fut": fut,
        "fut_vel": fut_vel,
        "last_pos": last_pos,
        "last_vel": last_vel,
    }


def window_losses(model: TrendSTGCN, tensors: dict, dt: float):
    mu, sigma, rho, vhat = model(tensors["disp"], tensors["adj"])
    lp = loss_p(mu, sigma, rho, tensors["fut"])
    lf = loss_f(vhat, tensors["fut"], tensors["last_pos"], tensors["last_vel"], dt)
    lv = loss_v(vhat, tensors["fut_vel"])
    return lp, lf, lv


def train(
    windows: list[Window],
    config: TrainConfig,
    model: TrendSTGCN | None = None,
) -> tuple[TrendSTGCN, list[dict]]:
    if not windows:
        raise ValueError("need at least one training window")
    torch.manual_seed(config.seed)
    if model is None:
        t_obs, _, _ = windows[0].obs.shape
        t_p, _, _ = windows[0].fut.shape
        model = TrendSTGCN(t_obs=t_obs, t_p=t_p, hidden=config.hidden)
    optimizer = torch.optim.SGD(model.parameters(), lr=config.lr)
    batches = [window_tensors(w, config.dt) for w in windows]
    history: list[dict] = []
    for epoch in range(1, config.epochs + 1):
        sums = {"l_p": 0.0, "l_f": 0.0, "l_v": 0.0, "total": 0.0}
        for tensors in batches:
            optimizer.zero_grad()
            lp, lf, lv = window_losses(model, tensors, config.dt)
            total = config.w_p * lp + config.w_f * lf + config.w_v * lv
            if not torch.isfinite(total):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}: "
                    f"l_p={lp.item():.4g} l_f={lf.item():.4g} l_v={lv.item():.4g}"
                )
            total.backward()
            if config.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()
            sums["l_p"] += lp.item()
            sums["l_f"] += lf.item()
            sums["l_v"] += lv.item()
            sums["total"] += total.item()
        record = {"epoch": epoch}
        record.update({k: v / len(batches) for k, v in sums.items()})
        history.append(record)
    if config.log_path:
        write_log(history, config.log_path)
    if config.checkpoint_path:
        save_checkpoint(model, config.checkpoint_path)
    return model, history


def write_log(history: list[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,l_p,l_f,l_v,total\n")
        for rec in history:
            fh.write(
                f"{rec['epoch']},{rec['l_p']:.8g},{rec['l_f']:.8g},"
                f"{rec['l_v']:.8g},{rec['total']:.8g}\n"
            )
