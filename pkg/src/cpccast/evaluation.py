"""Chronological splitting, sMAPE/RMSE scoring, competitive-frontier
segmentation, and the ablation runner."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from .models.base import ForecastSet
from .panel import PanelStats, WeeklyPanel

logger = logging.getLogger(__name__)

DEFAULT_TEST_FRACTION = 0.20

QUADRANTS = ("low/low", "low/high", "high/low", "high/high")


@dataclass(frozen=True)
class SplitSpec:
    train_weeks: np.ndarray     # column indices
    test_weeks: np.ndarray
    fraction: float

    @property
    def train_end(self) -> int:
        return int(self.test_weeks[0])


def chronological_split(panel: WeeklyPanel,
                        fraction: float = DEFAULT_TEST_FRACTION) -> SplitSpec:
    """Reserve the last ceil(fraction * T) weeks for testing."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    t_total = panel.n_weeks
    n_test = math.ceil(fraction * t_total)
    if n_test < 1 or n_test >= t_total:
        raise ValueError("panel too short for the requested split")
    return SplitSpec(
        train_weeks=np.arange(0, t_total - n_test),
        test_weeks=np.arange(t_total - n_test, t_total),
        fraction=fraction,
    )


def smape(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Factor-2 symmetric MAPE in [0, 200]; terms with |y| + |y_hat| = 0
    contribute 0."""
    y = np.asarray(actual, dtype=float)
    y_hat = np.asarray(predicted, dtype=float)
    if y.size == 0 or y.shape != y_hat.shape:
        raise ValueError("series must be equal-length and non-empty")
    denom = np.abs(y) + np.abs(y_hat)
    terms = np.where(denom > 0, 2.0 * np.abs(y_hat - y) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(100.0 * terms.mean())


def rmse(actual: Sequence[float], predicted: Sequence[float]) -> float:
    y = np.asarray(actual, dtype=float)
    y_hat = np.asarray(predicted, dtype=float)
    if y.size == 0 or y.shape != y_hat.shape:
        raise ValueError("series must be equal-length and non-empty")
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


# ---------------------------------------------------------------------------
# Frontier segmentation
# ---------------------------------------------------------------------------

@dataclass
class FrontierSegmentation:
    quadrant: np.ndarray        # (N,) object array of quadrant labels or None
    median_cpc: float
    median_cv: float
    excluded: int               # keywords with undefined CV

    def counts(self) -> dict[str, int]:
        return {q: int(np.sum(self.quadrant == q)) for q in QUADRANTS}


def frontier_segment(stats: PanelStats) -> FrontierSegmentation:
    """Median splits of training-range mean CPC and CV; values exactly at a
    median land on the "low" side; undefined-CV keywords are excluded."""
    defined = stats.cv_defined
    if defined.sum() < 4:
        raise ValueError("fewer than 4 keywords with defined stats")
    med_cpc = float(np.median(stats.mean_cpc[defined]))
    med_cv = float(np.median(stats.cv[defined]))
    quadrant = np.full(stats.mean_cpc.shape[0], None, dtype=object)
    for i in np.flatnonzero(defined):
        hi_cpc = stats.mean_cpc[i] > med_cpc
        hi_cv = stats.cv[i] > med_cv
        quadrant[i] = f"{'high' if hi_cpc else 'low'}/{'high' if hi_cv else 'low'}"
    return FrontierSegmentation(quadrant=quadrant, median_cpc=med_cpc,
                                median_cv=med_cv,
                                excluded=int((~defined).sum()))


# ---------------------------------------------------------------------------
# Evaluation report
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    model_id: str
    per_keyword: pd.DataFrame    # keyword_id, horizon, smape, rmse, n_pairs, quadrant
    summary: pd.DataFrame        # horizon, quadrant("all" incl.), smape_mean/std, rmse_mean/std, n_keywords
    skipped_keywords: dict[int, int] = field(default_factory=dict)  # horizon -> count

    def overall(self, horizon: int, metric: str = "smape",
                quadrant: str = "all") -> float:
        rows = self.summary[(self.summary.horizon == horizon)
                            & (self.summary.quadrant == quadrant)]
        return float(rows[f"{metric}_mean"].iloc[0])


def scored_test_origins(split: SplitSpec, horizon: int) -> np.ndarray:
    """Test origins t whose target week t + h is still inside the test
    range, keeping every scored target out-of-sample."""
    last = split.test_weeks[-1]
    return split.test_weeks[split.test_weeks + horizon <= last]


def evaluate(forecasts: ForecastSet, panel: WeeklyPanel, split: SplitSpec,
             segmentation: Optional[FrontierSegmentation] = None) -> EvalReport:
    """Per-keyword sMAPE/RMSE over scored test pairs, aggregated across the
    panel as mean +/- sample std, with quadrant sub-aggregates. Only
    observed (non-imputed) actuals are scored."""
    value_mask = panel.value_mask()
    horizons = sorted(set(int(h) for h in forecasts.horizons))
    table = forecasts.lookup()
    per_rows = []
    skipped: dict[int, int] = {}
    for h in horizons:
        origins = scored_test_origins(split, h)
        for k in range(panel.n_keywords):
            actual, pred = [], []
            for t in origins:
                target = t + h
                if not value_mask[k, target]:
                    continue
                key = (k, int(t), h)
                if key not in table:
                    continue
                actual.append(panel.cpc[k, target])
                pred.append(table[key])
            if not actual:
                skipped[h] = skipped.get(h, 0) + 1
                continue
            quad = segmentation.quadrant[k] if segmentation is not None else None
            per_rows.append({
                "keyword_id": k, "horizon": h,
                "smape": smape(actual, pred), "rmse": rmse(actual, pred),
                "n_pairs": len(actual), "quadrant": quad,
            })
    if not per_rows:
        raise ValueError("no scored (keyword, origin) pairs; check alignment")
    per_keyword = pd.DataFrame(per_rows)

    summary_rows = []
    for h in horizons:
        block = per_keyword[per_keyword.horizon == h]
        groups = [("all", block)]
        if segmentation is not None:
            groups += [(q, block[block.quadrant == q]) for q in QUADRANTS]
        for name, grp in groups:
            if len(grp) == 0:
                continue
            summary_rows.append({
                "horizon": h, "quadrant": name,
                "smape_mean": grp.smape.mean(),
                "smape_std": grp.smape.std(ddof=1) if len(grp) > 1 else 0.0,
                "rmse_mean": grp.rmse.mean(),
                "rmse_std": grp.rmse.std(ddof=1) if len(grp) > 1 else 0.0,
                "n_keywords": len(grp),
            })
    return EvalReport(model_id=forecasts.model_id,
                      per_keyword=per_keyword,
                      summary=pd.DataFrame(summary_rows),
                      skipped_keywords=skipped)


# ---------------------------------------------------------------------------
# Ablation runner
# ---------------------------------------------------------------------------

def run_ablation(
    configs: dict[str, "FeatureConfig"],
    run_one: Callable[[str, "FeatureConfig"], EvalReport],
) -> pd.DataFrame:
    """Train/evaluate one model per named feature config; failures are
    recorded as failed rows and the grid continues. Rows are ordered by
    horizon then overall sMAPE."""
    rows = []
    for name, cfg in configs.items():
        try:
            report = run_one(name, cfg)
        except Exception as exc:  # noqa: BLE001 - grid must continue
            logger.error("ablation config %r failed: %s", name, exc)
            rows.append({"config": name, "horizon": -1, "smape": np.nan,
                         "rmse": np.nan, "status": f"failed: {exc}"})
            continue
        for _, srow in report.summary.iterrows():
            rows.append({
                "config": name, "horizon": int(srow.horizon),
                "quadrant": srow.quadrant,
                "smape": srow.smape_mean, "rmse": srow.rmse_mean,
                "status": "ok",
            })
    df = pd.DataFrame(rows)
    return df.sort_values(["horizon", "smape"], kind="mergesort").reset_index(drop=True)
