"""Shared forecasting types: task definition and forecast containers."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_HORIZONS = (1, 6, 12)


@dataclass(frozen=True)
class ForecastTask:
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    input_window: int = 12

    def __post_init__(self):
        if not self.horizons:
            raise ValueError("horizons must be non-empty")
        if any(h <= 0 for h in self.horizons):
            raise ValueError("horizons must be positive")


@dataclass
class ForecastSet:
    """Point predictions keyed by (keyword id, origin week index, horizon).
    Entries are stored sorted by that key; predictions are finite and >= 0."""
    keyword_ids: np.ndarray
    origins: np.ndarray
    horizons: np.ndarray
    predictions: np.ndarray
    model_id: str = ""
    config_hash: str = ""

    def __post_init__(self):
        order = np.lexsort((self.horizons, self.origins, self.keyword_ids))
        self.keyword_ids = np.asarray(self.keyword_ids)[order]
        self.origins = np.asarray(self.origins)[order]
        self.horizons = np.asarray(self.horizons)[order]
        self.predictions = np.asarray(self.predictions, dtype=float)[order]
        if not np.all(np.isfinite(self.predictions)):
            raise ValueError("non-finite predictions")
        if (self.predictions < 0).any():
            raise ValueError("negative predictions (clamp before constructing)")

    def __len__(self) -> int:
        return len(self.predictions)

    def lookup(self) -> dict[tuple[int, int, int], float]:
        return {
            (int(k), int(t), int(h)): float(p)
            for k, t, h, p in zip(self.keyword_ids, self.origins,
                                  self.horizons, self.predictions)
        }


def grid_forecast(preds: np.ndarray, keyword_ids: np.ndarray,
                  origins: np.ndarray, horizons: tuple[int, ...],
                  model_id: str, config_hash: str = "") -> ForecastSet:
    """Build a ForecastSet from a dense (n_keywords, n_origins, n_horizons)
    prediction block; negative raw outputs are clamped to 0."""
    n_k, n_o, n_h = preds.shape
    ks = np.repeat(keyword_ids, n_o * n_h)
    ts = np.tile(np.repeat(origins, n_h), n_k)
    hs = np.tile(np.asarray(horizons), n_k * n_o)
    return ForecastSet(
        keyword_ids=ks, origins=ts, horizons=hs,
        predictions=np.maximum(preds.ravel(), 0.0),
        model_id=model_id, config_hash=config_hash,
    )


def save_forecasts(fset: ForecastSet, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "config_hash", "keyword_id",
                         "origin_week", "horizon", "prediction"])
        for k, t, h, p in zip(fset.keyword_ids, fset.origins,
                              fset.horizons, fset.predictions):
            writer.writerow([fset.model_id, fset.config_hash,
                             int(k), int(t), int(h), repr(float(p))])


def load_forecasts(path: str | Path) -> ForecastSet:
    ks, ts, hs, ps = [], [], [], []
    model_id = config_hash = ""
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            model_id = row["model_id"]
            config_hash = row["config_hash"]
            ks.append(int(row["keyword_id"]))
            ts.append(int(row["origin_week"]))
            hs.append(int(row["horizon"]))
            ps.append(float(row["prediction"]))
    return ForecastSet(np.asarray(ks), np.asarray(ts), np.asarray(hs),
                       np.asarray(ps), model_id=model_id,
                       config_hash=config_hash)
