"""Covariate tensor assembly: catalog shape, lag semantics, neighbor
aggregates, geographic dummies, leakage verification, and persistence."""

import numpy as np
import pytest

from cpccast import features as ft
from cpccast.proxies.dtw import DtwNeighborhood
from cpccast.proxies.geo import CONTINENTS, GeoTag
from cpccast.proxies.semgraph import SemanticGraph
from conftest import make_panel


def _graph():
    # node 0 -> {1: .5, 2: .5}; node 1 -> {0: .25, 2: .75}; node 2 -> {0: 1}
    return SemanticGraph(
        k=2,
        targets=np.array([[1, 2], [0, 2], [0, 1]]),
        weights=np.array([[0.5, 0.5], [0.25, 0.75], [1.0, 0.0]]),
    )


def _dtw(n=3, m=2):
    neighbors = np.array([[(i + j + 1) % n for j in range(m)] for i in range(n)])
    return DtwNeighborhood(m=m, band=8, neighbors=neighbors,
                           distances=np.zeros((n, m)), train_start=0,
                           train_end=16)


def _tags():
    return [GeoTag(continent="europe", country="portugal", city="lisbon"),
            GeoTag(continent="asia"),
            GeoTag()]


@pytest.fixture
def panel(rng):
    return make_panel(rng.uniform(1.0, 5.0, (3, 20)))


class TestConfig:

    def test_core_mandatory(self):
        with pytest.raises(ValueError):
            ft.FeatureConfig(families=("geo",))

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            ft.FeatureConfig(families=("core", "moon_phase"))

    def test_bad_geo_resolution_rejected(self):
        with pytest.raises(ValueError):
            ft.FeatureConfig(families=("core",), geo_resolution="planet")

    def test_hash_sensitive_to_settings(self):
        a = ft.FeatureConfig(families=("core",))
        b = ft.FeatureConfig(families=("core",), own_lags=(1, 2))
        assert a.hash() != b.hash()


class TestCoreFamily:

    def test_catalog_and_shape(self, panel):
        tensor = ft.build_features(panel)
        # 5 own-CPC lags + 2 lagged log volumes + imputation share
        assert tensor.n_features == 8
        assert tensor.values.shape == (3, 20, 8)
        assert all(d.family == "core" for d in tensor.catalog)

    def test_lag_semantics(self, panel):
        tensor = ft.build_features(panel)
        col = tensor.names().index("cpc_lag2")
        for t in range(20):
            expected = panel.cpc[:, max(t - 2, 0)]
            np.testing.assert_array_equal(tensor.values[:, t, col], expected)

    def test_log_volume_lag1(self, panel):
        tensor = ft.build_features(panel)
        col = tensor.names().index("log_clicks_lag1")
        np.testing.assert_allclose(tensor.values[:, 5, col],
                                   np.log1p(panel.clicks[:, 4]))

    def test_origin_weeks_skip_max_lag(self, panel):
        tensor = ft.build_features(panel)
        assert tensor.origin_weeks[0] == 12  # deepest own lag
        assert tensor.origin_weeks[-1] == 19

    def test_nan_panel_fatal(self, panel):
        panel.cpc[0, 3] = np.nan
        with pytest.raises(ValueError):
            ft.build_features(panel)


class TestNeighborFamilies:

    def test_sem_cpc_hand_computation(self, panel):
        cfg = ft.FeatureConfig(families=("core", "sem_cpc"),
                               neighbor_lags=(1,))
        tensor = ft.build_features(panel, graph=_graph(), cfg=cfg)
        col = tensor.names().index("sem_cpc_lag1")
        t = 7
        expected0 = 0.5 * panel.cpc[1, t - 1] + 0.5 * panel.cpc[2, t - 1]
        expected1 = 0.25 * panel.cpc[0, t - 1] + 0.75 * panel.cpc[2, t - 1]
        assert tensor.values[0, t, col] == pytest.approx(expected0, rel=1e-12)
        assert tensor.values[1, t, col] == pytest.approx(expected1, rel=1e-12)

    def test_equal_weights_reduce_to_plain_mean(self, panel):
        graph = _graph()
        graph.weights = np.full((3, 2), 0.5)
        cfg = ft.FeatureConfig(families=("core", "sem_cpc"), neighbor_lags=(1,))
        tensor = ft.build_features(panel, graph=graph, cfg=cfg)
        col = tensor.names().index("sem_cpc_lag1")
        t = 9
        expected = panel.cpc[graph.targets, t - 1].mean(axis=1)
        np.testing.assert_allclose(tensor.values[:, t, col], expected)

    def test_dtw_median_aggregate(self, rng):
        panel = make_panel(rng.uniform(1, 5, (5, 20)))
        nb = DtwNeighborhood(m=3, band=8,
                             neighbors=np.array([[1, 2, 3]] * 5),
                             distances=np.zeros((5, 3)),
                             train_start=0, train_end=16)
        cfg = ft.FeatureConfig(families=("core", "dtw_cpc"),
                               neighbor_lags=(1,), neighbor_aggregate="median")
        tensor = ft.build_features(panel, dtw=nb, cfg=cfg)
        col = tensor.names().index("dtw_cpc_lag1")
        expected = np.median(panel.cpc[[1, 2, 3], 7], axis=0)
        np.testing.assert_allclose(tensor.values[:, 8, col], expected)

    def test_missing_proxy_inputs_fatal(self, panel):
        with pytest.raises(ValueError):
            ft.build_features(panel, cfg=ft.FeatureConfig(
                families=("core", "sem_cpc")))
        with pytest.raises(ValueError):
            ft.build_features(panel, cfg=ft.FeatureConfig(
                families=("core", "dtw_cpc")))
        with pytest.raises(ValueError):
            ft.build_features(panel, cfg=ft.FeatureConfig(
                families=("core", "geo")))

    def test_misaligned_graph_fatal(self, panel):
        graph = _graph()
        graph.targets = graph.targets[:2]
        with pytest.raises(ValueError):
            ft.build_features(panel, graph=graph, cfg=ft.FeatureConfig(
                families=("core", "sem_cpc")))


class TestGeoFamily:

    def test_one_hot_partition(self, panel):
        cfg = ft.FeatureConfig(families=("core", "geo"))
        tensor = ft.build_features(panel, geo_tags=_tags(), cfg=cfg)
        geo_cols = [i for i, d in enumerate(tensor.catalog) if d.family == "geo"]
        assert len(geo_cols) == len(CONTINENTS) + 1  # 7 continents + unknown
        block = tensor.values[:, :, geo_cols]
        np.testing.assert_array_equal(block.sum(axis=2), np.ones((3, 20)))

    def test_continent_assignment(self, panel):
        cfg = ft.FeatureConfig(families=("core", "geo"))
        tensor = ft.build_features(panel, geo_tags=_tags(), cfg=cfg)
        names = tensor.names()
        assert tensor.values[0, 0, names.index("geo_continent_europe")] == 1.0
        assert tensor.values[1, 0, names.index("geo_continent_asia")] == 1.0
        assert tensor.values[2, 0, names.index("geo_continent_unknown")] == 1.0

    def test_country_resolution_levels_from_data(self, panel):
        cfg = ft.FeatureConfig(families=("core", "geo"), geo_resolution="country")
        tensor = ft.build_features(panel, geo_tags=_tags(), cfg=cfg)
        names = [n for n in tensor.names() if n.startswith("geo_country")]
        assert names == ["geo_country_portugal", "geo_country_unknown"]

    def test_static_over_time(self, panel):
        cfg = ft.FeatureConfig(families=("core", "geo"))
        tensor = ft.build_features(panel, geo_tags=_tags(), cfg=cfg)
        col = tensor.names().index("geo_continent_europe")
        assert np.ptp(tensor.values[:, :, col], axis=1).max() == 0.0


class TestCalendarAndMix:

    def test_calendar_angles(self, panel):
        cfg = ft.FeatureConfig(families=("core", "calendar"), train_end=16)
        tensor = ft.build_features(panel, cfg=cfg)
        names = tensor.names()
        sin = tensor.values[0, :, names.index("week_of_year_sin")]
        cos = tensor.values[0, :, names.index("week_of_year_cos")]
        np.testing.assert_allclose(sin ** 2 + cos ** 2, 1.0, atol=1e-12)
        scaled = tensor.values[0, :, names.index("week_index_scaled")]
        assert scaled[0] == 0.0
        assert scaled[15] == pytest.approx(1.0)

    def test_mix_shares_lagged_and_normalized(self, panel):
        n, t = panel.cpc.shape
        panel.device_counts = {"mobile": np.full((n, t), 3.0),
                               "desktop": np.full((n, t), 1.0)}
        cfg = ft.FeatureConfig(families=("core", "mix"))
        tensor = ft.build_features(panel, cfg=cfg)
        names = tensor.names()
        mob = tensor.values[:, :, names.index("device_share_mobile_lag1")]
        desk = tensor.values[:, :, names.index("device_share_desktop_lag1")]
        np.testing.assert_allclose(mob, 0.75)
        np.testing.assert_allclose(mob + desk, 1.0)


class TestDistractors:

    def test_deterministic_per_seed(self, panel):
        cfg = ft.FeatureConfig(families=("core", "distractor"),
                               distractor_count=3, distractor_seed=5)
        a = ft.build_features(panel, cfg=cfg)
        b = ft.build_features(panel, cfg=cfg)
        np.testing.assert_array_equal(a.values, b.values)

    def test_seed_changes_noise(self, panel):
        mk = lambda seed: ft.build_features(panel, cfg=ft.FeatureConfig(
            families=("core", "distractor"), distractor_count=1,
            distractor_seed=seed))
        col = mk(0).names().index("distractor_walk_0")
        assert not np.array_equal(mk(0).values[:, :, col],
                                  mk(1).values[:, :, col])

    def test_independent_of_panel_values(self, panel, rng):
        cfg = ft.FeatureConfig(families=("core", "distractor"),
                               distractor_count=2, distractor_seed=1)
        other = make_panel(rng.uniform(1, 9, (3, 20)))
        a = ft.build_features(panel, cfg=cfg)
        b = ft.build_features(other, cfg=cfg)
        cols = [i for i, d in enumerate(a.catalog) if d.family == "distractor"]
        np.testing.assert_array_equal(a.values[:, :, cols],
                                      b.values[:, :, cols])


class TestLeakage:

    def test_all_shipped_families_pass(self, panel):
        n, t = panel.cpc.shape
        panel.device_counts = {"mobile": np.full((n, t), 2.0)}
        cfg = ft.FeatureConfig(
            families=("core", "geo", "sem_cpc", "dtw_cpc", "calendar", "mix",
                      "distractor"),
            distractor_count=2, train_end=16)
        builder = lambda p: ft.build_features(p, graph=_graph(), dtw=_dtw(),
                                              geo_tags=_tags(), cfg=cfg)
        ok, offender = ft.verify_leakage_free(builder, panel, origin=14)
        assert ok, f"future leak through {offender}"

    def test_seeded_bug_detected_by_name(self, panel):
        def leaky_builder(p):
            base = ft.build_features(p)
            lead = np.roll(p.cpc, -1, axis=1)  # value at t = cpc[t+1]
            values = np.concatenate([base.values, lead[:, :, None]], axis=2)
            catalog = base.catalog + [ft.FeatureDesc("cpc_lead1", "core", 0)]
            return ft.FeatureTensor(values, catalog, base.origin_weeks)

        ok, offender = ft.verify_leakage_free(leaky_builder, panel, origin=10)
        assert not ok
        assert offender == "cpc_lead1"

    def test_origin_bounds_checked(self, panel):
        with pytest.raises(ValueError):
            ft.verify_leakage_free(ft.build_features, panel, origin=99)


class TestEquivariance:

    def test_keyword_permutation(self, panel, rng):
        perm = rng.permutation(3)
        permuted = panel.copy()
        for grid in ("impressions", "clicks", "cost", "cpc",
                     "observed_mask", "imputed_mask"):
            setattr(permuted, grid, getattr(panel, grid)[perm])
        permuted.keywords = [panel.keywords[i] for i in perm]
        a = ft.build_features(panel)
        b = ft.build_features(permuted)
        np.testing.assert_array_equal(a.values[perm], b.values)


class TestPersistence:

    def test_roundtrip(self, panel, tmp_path):
        cfg = ft.FeatureConfig(families=("core", "sem_cpc"))
        tensor = ft.build_features(panel, graph=_graph(), cfg=cfg)
        ft.save_features(tensor, tmp_path)
        back = ft.load_features(tmp_path)
        assert back.catalog == tensor.catalog
        assert back.config_hash == tensor.config_hash
        np.testing.assert_array_equal(back.origin_weeks, tensor.origin_weeks)
        # stored as float32
        np.testing.assert_allclose(back.values, tensor.values, rtol=1e-6)
