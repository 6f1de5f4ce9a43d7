"""Diffusion-convolution recurrent graph forecaster trained with MAE.

Each gated-recurrent gate applies a diffusion convolution over the fixed
row-stochastic semantic adjacency and its re-row-normalized transpose, up
to diffusion order K. Direct linear heads produce one prediction per
forecast horizon."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..features import FeatureTensor
from ..panel import WeeklyPanel
from ..proxies.semgraph import SemanticGraph
from .base import ForecastSet, ForecastTask, grid_forecast

logger = logging.getLogger(__name__)


@dataclass
class GraphForecasterConfig:
    diffusion_order: int = 2        # K
    hidden: int = 32                # H
    input_window: int = 12          # L
    learning_rate: float = 4e-3
    max_epochs: int = 150
    patience: int = 20
    batch_size: int = 8
    seed: int = 0
    val_fraction: float = 0.10


class DiffusionConv(nn.Module):
    """out = H W0 + sum_{p=1..K} (A^p H) Wp + ((At)^p H) Vp + bias, where A
    is the forward row-stochastic adjacency and At the re-normalized
    transpose. The p=0 term is the identity pass-through."""

    def __init__(self, in_dim: int, out_dim: int, order: int):
        super().__init__()
        self.order = order
        n_mats = 1 + 2 * order
        self.weight = nn.Parameter(torch.empty(n_mats, in_dim, out_dim))
        self.bias = nn.Parameter(torch.zeros(out_dim))
        nn.init.xavier_uniform_(self.weight)

    def forward(self, supports: list[torch.Tensor], h: torch.Tensor) -> torch.Tensor:
        # h: (..., N, in_dim); supports: [A, At]
        out = h @ self.weight[0]
        idx = 1
        for support in supports:
            prop = h
            for _ in range(self.order):
                prop = support @ prop
                out = out + prop @ self.weight[idx]
                idx += 1
        return out + self.bias


class DCGRUCell(nn.Module):
    """Gated recurrent cell whose gates are diffusion convolutions; the
    reset and update gates share one fused diffusion pass."""

    def __init__(self, in_dim: int, hidden: int, order: int):
        super().__init__()
        self.hidden = hidden
        self.gates = DiffusionConv(in_dim + hidden, 2 * hidden, order)
        self.candidate = DiffusionConv(in_dim + hidden, hidden, order)

    def forward(self, supports, x, h):
        xh = torch.cat([x, h], dim=-1)
        r, u = torch.sigmoid(self.gates(supports, xh)).split(self.hidden, dim=-1)
        c = torch.tanh(self.candidate(supports, torch.cat([x, r * h], dim=-1)))
        return u * h + (1.0 - u) * c


class GraphForecaster(nn.Module):
    """Single-layer DCGRU encoder over an input window plus per-horizon
    linear output heads. Consumes the row-normalized semantic graph as
    fixed (non-trainable) supports."""

    def __init__(self, graph: SemanticGraph, n_features: int,
                 horizons: tuple[int, ...], cfg: GraphForecasterConfig,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        self.horizons = tuple(horizons)
        dense = graph.to_dense()
        row_sums = dense.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > 1e-6:
            raise ValueError("graph rows are not normalized (sum != 1)")
        transpose = dense.T.copy()
        t_sums = transpose.sum(axis=1, keepdims=True)
        transpose = np.divide(transpose, np.where(t_sums > 0, t_sums, 1.0))
        self.register_buffer("support_fwd", torch.as_tensor(dense, dtype=dtype))
        self.register_buffer("support_bwd", torch.as_tensor(transpose, dtype=dtype))
        self.register_buffer("feat_mean", torch.zeros(n_features, dtype=dtype))
        self.register_buffer("feat_std", torch.ones(n_features, dtype=dtype))
        self.register_buffer("node_scale", torch.ones(1, dtype=dtype))
        self.cell = DCGRUCell(n_features, cfg.hidden, cfg.diffusion_order)
        self.heads = nn.Linear(cfg.hidden, len(self.horizons))
        self.to(dtype)
        n_params = sum(p.numel() for p in self.parameters())
        logger.info("graph forecaster: %d trainable parameters", n_params)

    def set_feature_scaling(self, mean: np.ndarray, std: np.ndarray) -> None:
        dtype = self.feat_mean.dtype
        self.feat_mean = torch.as_tensor(mean, dtype=dtype)
        self.feat_std = torch.as_tensor(np.where(std > 0, std, 1.0), dtype=dtype)

    def set_node_scale(self, scale: np.ndarray) -> None:
        """Per-keyword output scale (training-range mean CPC). The network
        operates in scale-free units; outputs are multiplied back, so
        predictions and the training loss stay in raw CPC."""
        safe = np.maximum(np.asarray(scale, dtype=float), 1e-6)
        self.node_scale = torch.as_tensor(safe[:, None], dtype=self.feat_mean.dtype)

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        """windows: (B, N, L, F) -> predictions (B, N, n_horizons)."""
        b, n, length, _ = windows.shape
        supports = [self.support_fwd, self.support_bwd]
        x = (windows - self.feat_mean) / self.feat_std
        h = windows.new_zeros((b, n, self.cfg.hidden))
        for t in range(length):
            h = self.cell(supports, x[:, :, t, :], h)
        return self.heads(h) * self.node_scale


def _make_windows(features: FeatureTensor, origins: np.ndarray,
                  window: int, dtype: torch.dtype) -> torch.Tensor:
    """(n_origins, N, L, F) input windows ending at each origin."""
    blocks = [features.values[:, t - window + 1:t + 1, :] for t in origins]
    return torch.as_tensor(np.stack(blocks), dtype=dtype)


def _targets_and_mask(panel: WeeklyPanel, origins: np.ndarray,
                      horizons: tuple[int, ...], dtype: torch.dtype
                      ) -> tuple[torch.Tensor, torch.Tensor]:
    ys = np.stack([np.stack([panel.cpc[:, t + h] for h in horizons], axis=1)
                   for t in origins])
    masks = np.stack([np.stack([~panel.imputed_mask[:, t + h] for h in horizons],
                               axis=1) for t in origins])
    return (torch.as_tensor(ys, dtype=dtype),
            torch.as_tensor(masks, dtype=torch.bool))


def _masked_mae(pred: torch.Tensor, target: torch.Tensor,
                mask: torch.Tensor) -> torch.Tensor:
    err = torch.abs(pred - target)[mask]
    return err.mean() if err.numel() else pred.sum() * 0.0


def training_origins(features: FeatureTensor, window: int,
                     horizons: tuple[int, ...], train_start: int,
                     train_end: int) -> np.ndarray:
    """Origins t with a full input window and all targets t+h inside the
    training range."""
    max_h = max(horizons)
    lo = max(train_start + window - 1, int(features.origin_weeks.min()))
    return np.arange(lo, train_end - max_h)


def fit_graph_forecaster(
    features: FeatureTensor,
    panel: WeeklyPanel,
    graph: SemanticGraph,
    task: ForecastTask,
    cfg: GraphForecasterConfig = GraphForecasterConfig(),
    train_start: int = 0,
    train_end: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> GraphForecaster:
    """Mini-batch MAE training over origin windows with early stopping on
    the trailing validation split of training origins. Deterministic for a
    fixed seed (single-threaded)."""
    train_end = train_end if train_end is not None else panel.n_weeks
    torch.manual_seed(cfg.seed)
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        model = GraphForecaster(graph, features.n_features, task.horizons,
                                cfg, dtype=dtype)
        origins = training_origins(features, cfg.input_window, task.horizons,
                                   train_start, train_end)
        if origins.size < 4:
            raise ValueError("too few training origins")
        n_val = max(1, int(round(cfg.val_fraction * origins.size)))
        train_o, val_o = origins[:-n_val], origins[-n_val:]

        flat = features.values[:, train_o, :].reshape(-1, features.n_features)
        model.set_feature_scaling(flat.mean(axis=0), flat.std(axis=0))
        model.set_node_scale(panel.cpc[:, train_start:train_end].mean(axis=1))

        x_train = _make_windows(features, train_o, cfg.input_window, dtype)
        y_train, m_train = _targets_and_mask(panel, train_o, task.horizons, dtype)
        x_val = _make_windows(features, val_o, cfg.input_window, dtype)
        y_val, m_val = _targets_and_mask(panel, val_o, task.horizons, dtype)

        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
        generator = torch.Generator().manual_seed(cfg.seed)
        best_val = np.inf
        best_state = copy.deepcopy(model.state_dict())
        stall = 0
        train_losses: list[float] = []
        for epoch in range(cfg.max_epochs):
            model.train()
            perm = torch.randperm(len(train_o), generator=generator)
            epoch_loss = 0.0
            for start in range(0, len(train_o), cfg.batch_size):
                batch = perm[start:start + cfg.batch_size]
                optimizer.zero_grad()
                pred = model(x_train[batch])
                loss = _masked_mae(pred, y_train[batch], m_train[batch])
                if not torch.isfinite(loss):
                    raise RuntimeError(f"training diverged at epoch {epoch}")
                loss.backward()
                optimizer.step()
                epoch_loss += float(loss.detach())
            train_losses.append(epoch_loss)
            model.eval()
            with torch.no_grad():
                val_mae = float(_masked_mae(model(x_val), y_val, m_val))
            logger.debug("epoch %d: train_loss=%.4f val_mae=%.4f",
                         epoch, epoch_loss, val_mae)
            if val_mae < best_val - 1e-9:
                best_val = val_mae
                best_state = copy.deepcopy(model.state_dict())
                stall = 0
            else:
                stall += 1
                if stall >= cfg.patience:
                    logger.info("early stop at epoch %d (best val MAE %.4f)",
                                epoch, best_val)
                    break
        model.load_state_dict(best_state)
        model.eval()
        model.best_val_mae = float(best_val)
        model.train_losses = train_losses
        return model
    finally:
        torch.set_num_threads(n_threads)


def predict_graph(model: GraphForecaster, features: FeatureTensor,
                  origins: Sequence[int]) -> ForecastSet:
    origins = np.asarray(origins, dtype=int)
    dtype = model.feat_mean.dtype
    windows = _make_windows(features, origins, model.cfg.input_window, dtype)
    model.eval()
    with torch.no_grad():
        preds = model(windows).numpy()          # (n_origins, N, n_h)
    preds = np.transpose(preds, (1, 0, 2))
    n = preds.shape[0]
    return grid_forecast(preds, np.arange(n), origins, model.horizons,
                         model_id="dcrnn", config_hash=features.config_hash)


def gradient_check(model: GraphForecaster, windows: torch.Tensor,
                   targets: torch.Tensor, mask: torch.Tensor,
                   eps: float = 1e-6) -> float:
    """Max relative error between autograd and central finite-difference
    gradients of the masked MAE loss. Model must be float64."""
    model.zero_grad()
    loss = _masked_mae(model(windows), targets, mask)
    loss.backward()
    worst = 0.0
    for param in model.parameters():
        analytic = param.grad.detach().clone().reshape(-1)
        flat = param.data.reshape(-1)
        fd = torch.zeros_like(analytic)
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + eps
            with torch.no_grad():
                up = float(_masked_mae(model(windows), targets, mask))
            flat[i] = orig - eps
            with torch.no_grad():
                down = float(_masked_mae(model(windows), targets, mask))
            flat[i] = orig
            fd[i] = (up - down) / (2 * eps)
        scale = max(float(fd.abs().max()), float(analytic.abs().max()), 1e-8)
        worst = max(worst, float((analytic - fd).abs().max()) / scale)
    return worst
