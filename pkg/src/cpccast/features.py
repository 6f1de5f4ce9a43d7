"""Leakage-free covariate tensor assembly: own-history lags, neighbor CPC
summaries, geographic dummies, calendar terms, mix shares, and optional
pure-noise distractors for ablation experiments."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .panel import WeeklyPanel, label_to_monday
from .proxies.dtw import DtwNeighborhood
from .proxies.geo import CONTINENTS, GeoTag
from .proxies.semgraph import SemanticGraph

logger = logging.getLogger(__name__)

FAMILIES = ("core", "geo", "sem_cpc", "dtw_cpc", "calendar", "mix", "distractor")

DEFAULT_OWN_LAGS = (1, 2, 4, 8, 12)
DEFAULT_NEIGHBOR_LAGS = (1, 2, 4)


@dataclass(frozen=True)
class FeatureDesc:
    name: str
    family: str
    lag: int = 0


@dataclass
class FeatureConfig:
    families: tuple[str, ...] = ("core",)
    geo_resolution: str = "continent"          # continent | country | city
    own_lags: tuple[int, ...] = DEFAULT_OWN_LAGS
    neighbor_lags: tuple[int, ...] = DEFAULT_NEIGHBOR_LAGS
    neighbor_aggregate: str = "mean"           # mean | median (dtw route)
    train_end: int | None = None               # week index scaling anchor
    distractor_count: int = 0
    distractor_seed: int = 0

    def __post_init__(self):
        if "core" not in self.families:
            raise ValueError("core family must be enabled")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown families: {sorted(unknown)}")
        if self.geo_resolution not in ("continent", "country", "city"):
            raise ValueError(f"bad geo resolution {self.geo_resolution!r}")

    def hash(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class FeatureTensor:
    values: np.ndarray                 # (N, T, F) float64
    catalog: list[FeatureDesc]
    origin_weeks: np.ndarray           # usable forecast-origin indices
    config_hash: str = ""

    @property
    def n_features(self) -> int:
        return len(self.catalog)

    def names(self) -> list[str]:
        return [d.name for d in self.catalog]

    def check_invariants(self) -> None:
        assert self.values.shape[2] == len(self.catalog)
        assert not np.isnan(self.values).any(), "undefined feature values"


def _lagged(grid: np.ndarray, lag: int) -> np.ndarray:
    """Shift columns right by `lag`, clamping at the first column so every
    cell stays defined (the clamp only ever reaches older data)."""
    n, t = grid.shape
    idx = np.maximum(np.arange(t) - lag, 0)
    return grid[:, idx]


def _neighbor_cpc(cpc: np.ndarray, targets: np.ndarray,
                  weights: np.ndarray | None, aggregate: str) -> np.ndarray:
    """Per-keyword aggregate of neighbor CPC series, (N, T)."""
    gathered = cpc[targets]                     # (N, m, T)
    if weights is not None:
        return np.einsum("nm,nmt->nt", weights, gathered)
    if aggregate == "median":
        return np.median(gathered, axis=1)
    return gathered.mean(axis=1)


def build_features(
    panel: WeeklyPanel,
    graph: Optional[SemanticGraph] = None,
    dtw: Optional[DtwNeighborhood] = None,
    geo_tags: Optional[Sequence[GeoTag]] = None,
    cfg: FeatureConfig = FeatureConfig(),
) -> FeatureTensor:
    """Assemble the N x T x F covariate tensor. Every feature at (k, t) is
    a function of data dated <= t plus static attributes only."""
    n, t_total = panel.cpc.shape
    if np.isnan(panel.cpc).any():
        raise ValueError("CPC gaps present; run impute_gaps before featurizing")
    for name, obj, length in (("graph", graph, getattr(graph, "n_nodes", n)),
                              ("dtw", dtw, getattr(dtw, "n_keywords", n)),
                              ("geo_tags", geo_tags,
                               len(geo_tags) if geo_tags is not None else n)):
        if obj is not None and length != n:
            raise ValueError(f"{name} not aligned with panel keywords")

    columns: list[np.ndarray] = []
    catalog: list[FeatureDesc] = []

    def add(name: str, family: str, grid: np.ndarray, lag: int = 0) -> None:
        columns.append(grid)
        catalog.append(FeatureDesc(name, family, lag))

    # core: own CPC lags, lagged log volumes, recent imputation share
    for lag in cfg.own_lags:
        add(f"cpc_lag{lag}", "core", _lagged(panel.cpc, lag), lag)
    add("log_clicks_lag1", "core", _lagged(np.log1p(panel.clicks), 1), 1)
    add("log_impressions_lag1", "core", _lagged(np.log1p(panel.impressions), 1), 1)
    imputed = panel.imputed_mask.astype(float)
    share = sum(_lagged(imputed, lag) for lag in range(4)) / 4.0
    add("imputed_share_4w", "core", share)

    if "sem_cpc" in cfg.families:
        if graph is None:
            raise ValueError("sem_cpc family requires a semantic graph")
        agg = _neighbor_cpc(panel.cpc, graph.targets, graph.weights, "mean")
        for lag in cfg.neighbor_lags:
            add(f"sem_cpc_lag{lag}", "sem_cpc", _lagged(agg, lag), lag)

    if "dtw_cpc" in cfg.families:
        if dtw is None:
            raise ValueError("dtw_cpc family requires DTW neighborhoods")
        agg = _neighbor_cpc(panel.cpc, dtw.neighbors, None, cfg.neighbor_aggregate)
        for lag in cfg.neighbor_lags:
            add(f"dtw_cpc_lag{lag}", "dtw_cpc", _lagged(agg, lag), lag)

    if "geo" in cfg.families:
        if geo_tags is None:
            raise ValueError("geo family requires geo tags")
        labels = [tag.label(cfg.geo_resolution) for tag in geo_tags]
        if cfg.geo_resolution == "continent":
            levels = list(CONTINENTS)
        else:
            levels = sorted({lb for lb in labels if lb is not None})
        for level in levels:
            onehot = np.array([1.0 if lb == level else 0.0 for lb in labels])
            add(f"geo_{cfg.geo_resolution}_{level.replace(' ', '_')}", "geo",
                np.repeat(onehot[:, None], t_total, axis=1))
        unknown = np.array([1.0 if lb is None else 0.0 for lb in labels])
        add(f"geo_{cfg.geo_resolution}_unknown", "geo",
            np.repeat(unknown[:, None], t_total, axis=1))

    if "calendar" in cfg.families:
        woy = np.array([label_to_monday(w).isocalendar()[1] for w in panel.weeks],
                       dtype=float)
        angle = 2.0 * np.pi * (woy - 1) / 52.0
        train_end = cfg.train_end if cfg.train_end is not None else t_total
        scale = max(train_end - 1, 1)
        add("week_of_year_sin", "calendar", np.repeat(np.sin(angle)[None, :], n, axis=0))
        add("week_of_year_cos", "calendar", np.repeat(np.cos(angle)[None, :], n, axis=0))
        add("week_index_scaled", "calendar",
            np.repeat((np.arange(t_total, dtype=float) / scale)[None, :], n, axis=0))

    if "mix" in cfg.families:
        for kind, counts in (("device", panel.device_counts),
                             ("searchtype", panel.searchtype_counts)):
            if not counts:
                continue
            total = sum(counts.values())
            safe_total = np.where(total > 0, total, 1.0)
            for label in sorted(counts):
                share = np.where(total > 0, counts[label] / safe_total, 0.0)
                add(f"{kind}_share_{label}_lag1", "mix", _lagged(share, 1), 1)

    if "distractor" in cfg.families and cfg.distractor_count > 0:
        # per-keyword random walks: spurious trending columns carrying no
        # information about CPC, used by the stacking ablation
        rng = np.random.default_rng(cfg.distractor_seed)
        for d in range(cfg.distractor_count):
            walk = np.cumsum(rng.standard_normal((n, t_total)), axis=1)
            add(f"distractor_walk_{d}", "distractor", walk)

    values = np.stack(columns, axis=2)
    max_lag = max([d.lag for d in catalog], default=0)
    tensor = FeatureTensor(
        values=values,
        catalog=catalog,
        origin_weeks=np.arange(max_lag, t_total),
        config_hash=cfg.hash(),
    )
    tensor.check_invariants()
    return tensor


def verify_leakage_free(
    builder: Callable[[WeeklyPanel], FeatureTensor],
    panel: WeeklyPanel,
    origin: int,
    seed: int = 0,
) -> tuple[bool, Optional[str]]:
    """Perturb every panel value dated strictly after `origin`, rebuild,
    and require bit-identical features at all t <= origin. Returns
    (passed, first offending feature name)."""
    if not (0 <= origin < panel.n_weeks):
        raise ValueError("origin outside panel")
    baseline = builder(panel)
    rng = np.random.default_rng(seed)
    noisy = panel.copy()
    tail = slice(origin + 1, panel.n_weeks)

    def perturb(grid: np.ndarray, positive: bool = True) -> None:
        block = grid[:, tail]
        noise = rng.uniform(0.5, 2.0, size=block.shape) if positive \
            else rng.standard_normal(block.shape)
        grid[:, tail] = block * noise + (0.1 if positive else 0.0)

    perturb(noisy.impressions)
    perturb(noisy.clicks)
    perturb(noisy.cost)
    perturb(noisy.cpc)
    for grid in list(noisy.device_counts.values()) + list(noisy.searchtype_counts.values()):
        perturb(grid)

    rebuilt = builder(noisy)
    head = slice(0, origin + 1)
    for f, desc in enumerate(baseline.catalog):
        if not np.array_equal(baseline.values[:, head, f], rebuilt.values[:, head, f]):
            return False, desc.name
    return True, None


# ---------------------------------------------------------------------------
# Persistence: binary blob + sidecar manifest
# ---------------------------------------------------------------------------

def save_features(tensor: FeatureTensor, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(tensor.values, dtype="<f4")
    (out / "features.bin").write_bytes(data.tobytes())
    manifest = {
        "shape": list(tensor.values.shape),
        "dtype": "<f4",
        "order": "row-major",
        "catalog": [{"name": d.name, "family": d.family, "lag": d.lag}
                    for d in tensor.catalog],
        "origin_weeks": tensor.origin_weeks.tolist(),
        "config_hash": tensor.config_hash,
    }
    (out / "features_manifest.json").write_text(json.dumps(manifest, indent=1))


def load_features(in_dir: str | Path) -> FeatureTensor:
    src = Path(in_dir)
    manifest = json.loads((src / "features_manifest.json").read_text())
    shape = tuple(manifest["shape"])
    raw = np.frombuffer((src / "features.bin").read_bytes(), dtype="<f4")
    values = raw.reshape(shape).astype(np.float64)
    catalog = [FeatureDesc(d["name"], d["family"], d["lag"])
               for d in manifest["catalog"]]
    return FeatureTensor(
        values=values,
        catalog=catalog,
        origin_weeks=np.asarray(manifest["origin_weeks"], dtype=np.int64),
        config_hash=manifest["config_hash"],
    )
