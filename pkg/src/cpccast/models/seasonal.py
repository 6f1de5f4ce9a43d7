"""Seasonal-naive reference forecaster."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..panel import WeeklyPanel
from .base import ForecastSet, grid_forecast

DEFAULT_PERIOD = 52


def seasonal_naive(panel: WeeklyPanel, origins: Sequence[int],
                   horizons: Sequence[int],
                   period: int = DEFAULT_PERIOD) -> ForecastSet:
    """Predict cpc(k, t + h - period) when that week is inside the panel,
    falling back to the last value cpc(k, t)."""
    origins = np.asarray(origins, dtype=int)
    if (origins < 0).any() or (origins >= panel.n_weeks).any():
        raise ValueError("origin outside panel")
    if np.isnan(panel.cpc).any():
        raise ValueError("CPC gaps present; impute before forecasting")
    n = panel.n_keywords
    preds = np.empty((n, len(origins), len(horizons)))
    for oi, t in enumerate(origins):
        for hi, h in enumerate(horizons):
            src = t + h - period
            preds[:, oi, hi] = panel.cpc[:, src] if src >= 0 else panel.cpc[:, t]
    return grid_forecast(preds, np.arange(n), origins, tuple(horizons),
                         model_id=f"snaive_p{period}")
