"""Spatio-temporal graph construction.

Per timestep, agents are nodes; edge weight between two agents is the inverse
of their distance (zero when they coincide, so self-affinity stays off the
diagonal). Node features are per-step displacements for the displacement
graph and velocities for the velocity graph.
"""

from __future__ import annotations

import numpy as np


def adjacency(positions: np.ndarray) -> np.ndarray:
    """Inverse-distance affinity matrix for one frame of positions (N, 2)."""
    n = len(positions)
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.hypot(*(positions[i] - positions[j])))
            if d != 0.0:
                a[i, j] = a[j, i] = 1.0 / d
    return a


def normalized_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric normalization D^-1/2 (I + A) D^-1/2."""
    a_tilde = np.eye(len(a)) + a
    d = a_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]


def build_graphs(
    positions: np.ndarray,
    dt: float,
    prev_positions: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Displacement features, velocity features, and per-step adjacencies.

    positions: (T, N, 2) observed window. The first frame's displacement uses
    prev_positions (the raw frame before the window) when given, else zero.
    Returns (disp (T, N, 2), vel (T, N, 2), adj (T, N, N)).
    """
    t_obs, n, _ = positions.shape
    disp = np.zeros_like(positions)
    disp[1:] = positions[1:] - positions[:-1]
    if prev_positions is not None:
        disp[0] = positions[0] - prev_positions
    vel = disp / dt
    adj = np.stack([adjacency(positions[t]) for t in range(t_obs)])
    return disp, vel, adj
