"""Metrics, chronological splitting, frontier segmentation, report
aggregation, and the ablation grid runner."""

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from cpccast import evaluation as ev
from cpccast.models.base import grid_forecast
from cpccast.panel import PanelStats, compute_stats
from conftest import make_panel
from oracles import median_quadrant_oracle, smape_oracle

finite = st.floats(min_value=-100, max_value=100, allow_nan=False)


class TestMetrics:

    def test_smape_hand_fixture(self):
        # terms: 2|11-10|/21 = 9.5238..., 2|8-10|/18 = 22.222...
        val = ev.smape([10.0, 10.0], [11.0, 8.0])
        assert val == pytest.approx((100 * 2 / 21 + 100 * 4 / 18) / 2, abs=1e-9)

    def test_smape_perfect_zero(self):
        assert ev.smape([1.0, 2.0, 0.0], [1.0, 2.0, 0.0]) == 0.0

    def test_smape_zero_actual_nonzero_pred_is_200(self):
        assert ev.smape([0.0], [5.0]) == pytest.approx(200.0)

    def test_smape_both_zero_contributes_zero(self):
        assert ev.smape([0.0, 10.0], [0.0, 10.0]) == 0.0

    def test_smape_matches_termwise_oracle(self, rng):
        y = rng.uniform(0, 5, 200)
        y_hat = rng.uniform(0, 5, 200)
        y[:10] = 0.0
        assert ev.smape(y, y_hat) == pytest.approx(smape_oracle(y, y_hat),
                                                   abs=1e-9)

    @given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
    def test_smape_bounds_and_symmetry(self, pairs):
        y = [a for a, _ in pairs]
        y_hat = [b for _, b in pairs]
        val = ev.smape(y, y_hat)
        assert 0.0 <= val <= 200.0
        assert val == pytest.approx(ev.smape(y_hat, y), abs=1e-12)

    def test_rmse_hand_fixture(self):
        # errors 1 and -2: sqrt((1 + 4) / 2)
        assert ev.rmse([1.0, 2.0], [2.0, 0.0]) == pytest.approx(
            math.sqrt(2.5), abs=1e-12)

    def test_single_point_rmse_is_abs_error(self):
        assert ev.rmse([3.0], [1.0]) == 2.0

    def test_empty_or_mismatched_fatal(self):
        with pytest.raises(ValueError):
            ev.smape([], [])
        with pytest.raises(ValueError):
            ev.rmse([1.0], [1.0, 2.0])


class TestSplit:

    def test_ceil_of_fraction(self, rng):
        panel = make_panel(rng.uniform(1, 5, (2, 127)))
        split = ev.chronological_split(panel, 0.20)
        assert len(split.test_weeks) == 26        # ceil(25.4)
        assert split.train_end == 101
        assert split.test_weeks[-1] == 126

    def test_contiguous_and_disjoint(self, rng):
        panel = make_panel(rng.uniform(1, 5, (2, 30)))
        split = ev.chronological_split(panel, 0.25)
        combined = np.concatenate([split.train_weeks, split.test_weeks])
        np.testing.assert_array_equal(combined, np.arange(30))

    def test_bad_fraction_fatal(self, rng):
        panel = make_panel(rng.uniform(1, 5, (2, 30)))
        for f in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                ev.chronological_split(panel, f)

    def test_scored_origins_keep_targets_in_test(self, rng):
        panel = make_panel(rng.uniform(1, 5, (2, 30)))
        split = ev.chronological_split(panel, 0.20)  # test weeks 24..29
        origins = ev.scored_test_origins(split, horizon=3)
        assert origins.tolist() == [24, 25, 26]


def _stats(mean_cpc, cv):
    n = len(mean_cpc)
    return PanelStats(
        mean_cpc=np.asarray(mean_cpc, dtype=float),
        std_cpc=np.asarray(cv, dtype=float) * np.asarray(mean_cpc, dtype=float),
        cv=np.asarray(cv, dtype=float),
        cv_defined=np.ones(n, dtype=bool),
        n_cells=np.full(n, 10),
        pooled_mean=float(np.mean(mean_cpc)), pooled_max=float(np.max(mean_cpc)),
        pooled_p99=float(np.max(mean_cpc)), pooled_skewness=0.0,
        week_start=0, week_end=10,
    )


class TestFrontier:

    def test_one_keyword_per_quadrant(self):
        seg = ev.frontier_segment(_stats([1.0, 1.0, 9.0, 9.0],
                                         [0.1, 0.9, 0.1, 0.9]))
        assert seg.quadrant.tolist() == ["low/low", "low/high",
                                         "high/low", "high/high"]
        assert seg.counts() == {q: 1 for q in ev.QUADRANTS}

    def test_all_identical_land_low_low(self):
        seg = ev.frontier_segment(_stats([2.0] * 4, [0.3] * 4))
        assert seg.quadrant.tolist() == ["low/low"] * 4

    def test_at_median_is_low(self):
        # odd count: middle value equals the median exactly
        seg = ev.frontier_segment(_stats([1.0, 2.0, 3.0, 4.0, 5.0],
                                         [0.5, 0.4, 0.3, 0.2, 0.1]))
        assert seg.quadrant[2] == "low/low"

    def test_undefined_cv_excluded(self):
        stats = _stats([1.0, 2.0, 3.0, 4.0, 5.0], [0.1, 0.2, 0.3, 0.4, 0.5])
        stats.cv_defined[1] = False
        seg = ev.frontier_segment(stats)
        assert seg.quadrant[1] is None
        assert seg.excluded == 1

    def test_too_few_defined_fatal(self):
        stats = _stats([1.0, 2.0, 3.0, 4.0], [0.1, 0.2, 0.3, 0.4])
        stats.cv_defined[:] = [True, True, True, False]
        with pytest.raises(ValueError):
            ev.frontier_segment(stats)

    def test_matches_sort_based_oracle(self, rng):
        mean_cpc = rng.uniform(0.5, 10, 41)
        cv = rng.uniform(0.05, 1.5, 41)
        seg = ev.frontier_segment(_stats(mean_cpc, cv))
        assert seg.quadrant.tolist() == median_quadrant_oracle(mean_cpc, cv)


def _forecast_everything(panel, split, horizons, noise_by_keyword):
    """Predictions = actual + per-keyword constant offset."""
    origins = split.test_weeks  # evaluate trims unscorable origins per horizon
    n = panel.n_keywords
    preds = np.empty((n, len(origins), len(horizons)))
    for oi, t in enumerate(origins):
        for hi, h in enumerate(horizons):
            target = min(t + h, panel.n_weeks - 1)
            preds[:, oi, hi] = panel.cpc[:, target] + noise_by_keyword
    return grid_forecast(preds, np.arange(n), origins, tuple(horizons), "toy")


class TestEvaluate:

    def test_brute_force_recount(self, rng):
        panel = make_panel(rng.uniform(1, 5, (5, 40)))
        split = ev.chronological_split(panel, 0.25)
        offsets = np.array([0.0, 0.1, 0.2, 0.3, 0.4])
        horizons = (1, 3)
        fset = _forecast_everything(panel, split, horizons, offsets)
        report = ev.evaluate(fset, panel, split)
        table = fset.lookup()
        for h in horizons:
            origins = ev.scored_test_origins(split, h)
            for k in range(5):
                actual = [panel.cpc[k, t + h] for t in origins]
                pred = [table[(k, t, h)] for t in origins]
                row = report.per_keyword[
                    (report.per_keyword.keyword_id == k)
                    & (report.per_keyword.horizon == h)].iloc[0]
                assert row.smape == pytest.approx(smape_oracle(actual, pred),
                                                  abs=1e-9)
                assert row.n_pairs == len(origins)
            block = report.per_keyword[report.per_keyword.horizon == h]
            assert report.overall(h) == pytest.approx(block.smape.mean(),
                                                      abs=1e-12)

    def test_zero_offset_scores_zero(self, rng):
        panel = make_panel(rng.uniform(1, 5, (4, 40)))
        split = ev.chronological_split(panel, 0.25)
        fset = _forecast_everything(panel, split, (1,), np.zeros(4))
        report = ev.evaluate(fset, panel, split)
        assert report.overall(1) == 0.0
        assert report.overall(1, "rmse") == 0.0

    def test_imputed_targets_not_scored(self, rng):
        cpc = rng.uniform(1, 5, (4, 40))
        panel = make_panel(cpc)
        split = ev.chronological_split(panel, 0.25)
        fset = _forecast_everything(panel, split, (1,), np.full(4, 0.5))
        base = ev.evaluate(fset, panel, split)
        panel.imputed_mask[:, 35] = True
        masked = ev.evaluate(fset, panel, split)
        assert (masked.per_keyword.n_pairs == base.per_keyword.n_pairs - 1).all()

    def test_keyword_without_pairs_skipped(self, rng):
        panel = make_panel(rng.uniform(1, 5, (4, 40)))
        split = ev.chronological_split(panel, 0.25)
        fset = _forecast_everything(panel, split, (1,), np.zeros(4))
        panel.imputed_mask[0, 31:] = True
        report = ev.evaluate(fset, panel, split)
        assert report.skipped_keywords == {1: 1}
        assert set(report.per_keyword.keyword_id) == {1, 2, 3}

    def test_quadrant_subaggregates_partition(self, rng):
        panel = make_panel(rng.uniform(1, 5, (8, 40)))
        split = ev.chronological_split(panel, 0.25)
        stats = compute_stats(panel, 0, split.train_end)
        seg = ev.frontier_segment(stats)
        fset = _forecast_everything(panel, split, (1,),
                                    rng.uniform(0, 1, 8))
        report = ev.evaluate(fset, panel, split, segmentation=seg)
        summary = report.summary
        all_row = summary[(summary.horizon == 1) & (summary.quadrant == "all")]
        quad_rows = summary[(summary.horizon == 1) & (summary.quadrant != "all")]
        assert quad_rows.n_keywords.sum() == all_row.n_keywords.iloc[0]
        weighted = (quad_rows.smape_mean * quad_rows.n_keywords).sum() \
            / quad_rows.n_keywords.sum()
        assert weighted == pytest.approx(all_row.smape_mean.iloc[0], abs=1e-9)

    def test_no_pairs_at_all_fatal(self, rng):
        panel = make_panel(rng.uniform(1, 5, (4, 40)))
        split = ev.chronological_split(panel, 0.25)
        fset = _forecast_everything(panel, split, (1,), np.zeros(4))
        panel.imputed_mask[:, 31:] = True
        with pytest.raises(ValueError):
            ev.evaluate(fset, panel, split)


class TestAblation:

    def test_failure_recorded_and_grid_continues(self):
        def run_one(name, cfg):
            if name == "broken":
                raise RuntimeError("boom")
            return type("R", (), {"summary": pd.DataFrame([
                {"horizon": 1, "quadrant": "all",
                 "smape_mean": {"good": 10.0, "better": 5.0}[name],
                 "rmse_mean": 1.0}])})()

        df = ev.run_ablation({"good": None, "broken": None, "better": None},
                             run_one)
        failed = df[df.status != "ok"]
        assert list(failed.config) == ["broken"]
        assert "boom" in failed.status.iloc[0]
        ok = df[df.status == "ok"]
        # ordered by horizon then sMAPE
        assert list(ok.config) == ["better", "good"]
