"""Training losses.

* position: negative log-likelihood of the observed future under the
  predicted per-step bivariate Gaussians;
* kinematic: trapezoidal displacement of the surrogate velocities must match
  the observed per-step displacements (uniform-acceleration assumption over
  one timestep);
* velocity: squared error of the surrogate velocities against observed ones.

Each loss sums over the prediction horizon and averages over agents.
"""

from __future__ import annotations

import math

import torch

TWO_PI = 2.0 * math.pi


def loss_p(
    mu: torch.Tensor, sigma: torch.Tensor, rho: torch.Tensor, target: torch.Tensor
) -> torch.Tensor:
    """-sum_t log N(target_t | mu_t, sigma_t, rho_t), averaged over agents.

    Shapes: mu/sigma/target (T_p, N, 2), rho (T_p, N).
    """
    dx = (target[..., 0] - mu[..., 0]) / sigma[..., 0]
    dy = (target[..., 1] - mu[..., 1]) / sigma[..., 1]
    one_minus_r2 = 1.0 - rho**2
    z = dx**2 - 2.0 * rho * dx * dy + dy**2
    log_pdf = (
        -torch.log(TWO_PI * sigma[..., 0] * sigma[..., 1] * torch.sqrt(one_minus_r2))
        - z / (2.0 * one_minus_r2)
    )
    return -log_pdf.sum(dim=0).mean()


def loss_f(
    vhat: torch.Tensor,
    target_pos: torch.Tensor,
    last_obs_pos: torch.Tensor,
    last_obs_vel: torch.Tensor,
    dt: float,
) -> torch.Tensor:
    """sum_t ((vhat_t + vhat_{t-1})/2 * dt - (s_t - s_{t-1}))^2, agents averaged.

    The step into the horizon uses the last observed position and velocity
    as s_0 and vhat_0.
    """
    v_prev = torch.cat([last_obs_vel[None], vhat[:-1]], dim=0)
    s_prev = torch.cat([last_obs_pos[None], target_pos[:-1]], dim=0)
    residual = 0.5 * (vhat + v_prev) * dt - (target_pos - s_prev)
    return (residual**2).sum(dim=(0, 2)).mean()


def loss_v(vhat: torch.Tensor, target_vel: torch.Tensor) -> torch.Tensor:
    """sum_t (vhat_t - v_t)^2, averaged over agents."""
    return ((vhat - target_vel) ** 2).sum(dim=(0, 2)).mean()


def total_loss(
    parts: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
    w_p: float,
    w_f: float,
    w_v: float,
) -> torch.Tensor:
    lp, lf, lv = parts
    return w_p * lp + w_f * lf + w_v * lv
