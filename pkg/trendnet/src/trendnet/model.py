"""Network: graph convolutions over each frame, temporal convolutions with
residuals over the window, a per-agent decoder emitting bivariate-Gaussian
parameters for every future step, and a convolutional velocity surrogate that
maps the predicted means to velocities (the physics-informed branch).
"""

from __future__ import annotations

import torch
from torch import nn


def gcn_layer(h: torch.Tensor, a: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
    """ReLU(D^-1/2 (I+A) D^-1/2 H W) for one frame.

    h: (N, C_in), a: (N, N) raw affinities, w: (C_in, C_out).
    """
    a_tilde = torch.eye(len(a), dtype=a.dtype, device=a.device) + a
    inv_sqrt = a_tilde.sum(dim=1).rsqrt()
    norm = a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]
    return torch.relu(norm @ h @ w)


def tcn_layer(h: torch.Tensor, conv: nn.Conv1d) -> torch.Tensor:
    """ReLU(h + W_c h): temporal convolution plus residual.

    h: (N, C, T).
    """
    return torch.relu(h + conv(h))


class GraphConv(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(c_in, c_out))
        nn.init.xavier_uniform_(self.weight)

    def forward(self, h, a):
        # h: (T, N, C); a: (T, N, N) -- each frame convolved with its graph
        out = []
        for t in range(h.shape[0]):
            out.append(gcn_layer(h[t], a[t], self.weight))
        return torch.stack(out)


class VelocitySurrogate(nn.Module):
    """Maps (step index, predicted mean) sequences to velocities, (T_p, N, 2)."""

    def __init__(self, hidden: int = 32, layers: int = 3):
        super().__init__()
        convs = []
        c_in = 3
        for k in range(layers):
            c_out = 2 if k == layers - 1 else hidden
            convs.append(nn.Conv1d(c_in, c_out, kernel_size=3, padding=1))
            c_in = c_out
        self.convs = nn.ModuleList(convs)

    def forward(self, mu: torch.Tensor) -> torch.Tensor:
        t_p, n, _ = mu.shape
        t_norm = torch.linspace(
            1.0 / t_p, 1.0, t_p, dtype=mu.dtype, device=mu.device
        )
        feats = torch.cat(
            [t_norm[:, None, None].expand(t_p, n, 1), mu], dim=2
        )  # (T_p, N, 3)
        h = feats.permute(1, 2, 0)  # (N, 3, T_p)
        for k, conv in enumerate(self.convs):
            h = conv(h)
            if k < len(self.convs) - 1:
                h = torch.relu(h)
        return h.permute(2, 0, 1)  # (T_p, N, 2)


class TrendSTGCN(nn.Module):
    """Spatio-temporal encoder plus Gaussian decoder and velocity surrogate."""

    def __init__(
        self,
        t_obs: int = 8,
        t_p: int = 12,
        hidden: int = 32,
        gcn_layers: int = 2,
        tcn_layers: int = 3,
        decoder_hidden: int | None = None,
        surrogate_hidden: int | None = None,
    ):
        super().__init__()
        self.t_obs = t_obs
        self.t_p = t_p
        self.hidden = hidden
        dims = [2] + [hidden] * gcn_layers
        self.gcn = nn.ModuleList(
            GraphConv(a, b) for a, b in zip(dims, dims[1:])
        )
        self.encode_fc = nn.Linear(hidden, hidden)
        self.tcn = nn.ModuleList(
            nn.Conv1d(hidden, hidden, kernel_size=3, padding=1)
            for _ in range(tcn_layers)
        )
        dec_hidden = decoder_hidden or hidden
        self.decoder = nn.Sequential(
            nn.Linear(hidden * t_obs, dec_hidden),
            nn.ReLU(),
            nn.Linear(dec_hidden, t_p * 5),
        )
        self.surrogate = VelocitySurrogate(surrogate_hidden or hidden)

    def forward(self, disp: torch.Tensor, adj: torch.Tensor):
        """disp: (T_obs, N, 2), adj: (T_obs, N, N).

        Returns mu (T_p, N, 2), sigma (T_p, N, 2), rho (T_p, N),
        vhat (T_p, N, 2).
        """
        h = disp
        for layer in self.gcn:
            h = layer(h, adj)
        h = torch.relu(self.encode_fc(h))       # (T, N, C)
        h = h.permute(1, 2, 0)                   # (N, C, T)
        for conv in self.tcn:
            h = tcn_layer(h, conv)
        n = h.shape[0]
        raw = self.decoder(h.reshape(n, -1))     # (N, T_p*5)
        raw = raw.view(n, self.t_p, 5).permute(1, 0, 2)  # (T_p, N, 5)
        mu = raw[..., 0:2]
        # clamp keeps sigma finite and |rho| strictly below 1 even at
        # saturating activations
        sigma = torch.exp(raw[..., 2:4].clamp(-20.0, 20.0))
        rho = torch.tanh(raw[..., 4]) * (1.0 - 1e-7)
        vhat = self.surrogate(mu)
        return mu, sigma, rho, vhat

    def config(self) -> dict:
        return {
            "t_obs": self.t_obs,
            "t_p": self.t_p,
            "hidden": self.hidden,
            "gcn_layers": len(self.gcn),
            "tcn_layers": len(self.tcn),
        }


def save_checkpoint(model: TrendSTGCN, path) -> None:
    torch.save({"config": model.config(), "state": model.state_dict()}, path)


def load_checkpoint(path) -> TrendSTGCN:
    payload = torch.load(path, weights_only=False)
    model = TrendSTGCN(**payload["config"])
    model.load_state_dict(payload["state"])
    model.eval()
    return model
