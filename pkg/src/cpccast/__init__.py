"""Competition-aware CPC forecasting: ingestion, weekly panels, proxy
graphs, covariate and graph forecasters, and frontier-aware evaluation."""

__version__ = "0.1.0"
