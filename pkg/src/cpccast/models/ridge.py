"""Ridge autoregression with exogenous covariates, one direct head per
forecast horizon."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from ..features import FeatureTensor
from ..panel import WeeklyPanel
from .base import ForecastSet, ForecastTask, grid_forecast

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1.0


@dataclass
class RidgeHead:
    weights: np.ndarray        # (F,)
    intercept: float
    mean: np.ndarray           # training-rows feature mean
    std: np.ndarray            # training-rows feature std (0 -> 1)


@dataclass
class RidgeModel:
    heads: dict[int, RidgeHead]
    penalty: float
    feature_names: list[str]
    config_hash: str = ""

    @property
    def horizons(self) -> tuple[int, ...]:
        return tuple(sorted(self.heads))


def _training_rows(features: FeatureTensor, panel: WeeklyPanel,
                   horizon: int, train_start: int, train_end: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Stack (feature row at t, target cpc at t+h) pairs with both weeks in
    [train_start, train_end); targets at imputed cells are skipped."""
    usable = set(features.origin_weeks.tolist())
    xs, ys = [], []
    for t in range(train_start, train_end - horizon):
        if t not in usable:
            continue
        target = panel.cpc[:, t + horizon]
        ok = ~panel.imputed_mask[:, t + horizon] & ~np.isnan(target)
        if not ok.any():
            continue
        xs.append(features.values[ok, t, :])
        ys.append(target[ok])
    if not xs:
        raise ValueError(f"no training rows for horizon {horizon}")
    return np.concatenate(xs), np.concatenate(ys)


def fit_ridge(features: FeatureTensor, panel: WeeklyPanel, task: ForecastTask,
              penalty: float = DEFAULT_LAMBDA, train_start: int = 0,
              train_end: int | None = None) -> RidgeModel:
    """Solve the standardized normal equations (Z'Z + lambda I) w = Z'y per
    horizon; the intercept is unpenalized (features are centered on the
    training rows, so it equals the training-target mean)."""
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    train_end = train_end if train_end is not None else panel.n_weeks
    heads: dict[int, RidgeHead] = {}
    for h in task.horizons:
        x, y = _training_rows(features, panel, h, train_start, train_end)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        z = (x - mean) / std
        gram = z.T @ z + penalty * np.eye(z.shape[1])
        rhs = z.T @ (y - y.mean())
        try:
            weights = scipy.linalg.solve(gram, rhs, assume_a="pos")
        except np.linalg.LinAlgError:
            raise ValueError(
                "singular normal equations; set a positive ridge penalty")
        if penalty == 0 and not np.all(np.isfinite(weights)):
            raise ValueError(
                "singular normal equations; set a positive ridge penalty")
        heads[h] = RidgeHead(weights=weights, intercept=float(y.mean()),
                             mean=mean, std=std)
        logger.debug("ridge h=%d: %d rows, %d features", h, len(y), z.shape[1])
    return RidgeModel(heads=heads, penalty=penalty,
                      feature_names=features.names(),
                      config_hash=features.config_hash)


def predict_ridge(model: RidgeModel, features: FeatureTensor,
                  origins: Sequence[int]) -> ForecastSet:
    origins = np.asarray(origins, dtype=int)
    horizons = model.horizons
    n = features.values.shape[0]
    preds = np.empty((n, len(origins), len(horizons)))
    for hi, h in enumerate(horizons):
        head = model.heads[h]
        for oi, t in enumerate(origins):
            z = (features.values[:, t, :] - head.mean) / head.std
            preds[:, oi, hi] = z @ head.weights + head.intercept
    return grid_forecast(preds, np.arange(n), origins, horizons,
                         model_id=f"ridge_l{model.penalty:g}",
                         config_hash=model.config_hash)
