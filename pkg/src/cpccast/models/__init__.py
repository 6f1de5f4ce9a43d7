"""Forecasting model family: seasonal-naive floor, ridge ARX, and the
diffusion-recurrent graph forecaster."""

from .base import (DEFAULT_HORIZONS, ForecastSet, ForecastTask, grid_forecast,
                   load_forecasts, save_forecasts)
from .seasonal import seasonal_naive
from .ridge import RidgeModel, fit_ridge, predict_ridge
from .dcrnn import (GraphForecaster, GraphForecasterConfig,
                    fit_graph_forecaster, gradient_check, predict_graph,
                    training_origins)
from .store import load_checkpoint, save_checkpoint

__all__ = [
    "DEFAULT_HORIZONS", "ForecastSet", "ForecastTask", "grid_forecast",
    "load_forecasts", "save_forecasts", "seasonal_naive",
    "RidgeModel", "fit_ridge", "predict_ridge",
    "GraphForecaster", "GraphForecasterConfig", "fit_graph_forecaster",
    "gradient_check", "predict_graph", "training_origins",
    "load_checkpoint", "save_checkpoint",
]
