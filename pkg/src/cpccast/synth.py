"""Seeded synthetic market generator with known cluster, geographic, and
seasonal structure, for verifying proxy recovery and forecasting gains at
desk scale."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ingest import CanonicalKeyword, RawEvent, normalize_keyword
from .panel import WeeklyPanel, week_label
from .proxies.dtw import DtwNeighborhood
from .proxies.embeddings import EmbeddingMatrix
from .proxies.geo import GeoTag, load_bundled_gazetteer
from .proxies.semgraph import SemanticGraph

logger = logging.getLogger(__name__)

_ADJECTIVES = ("cheap", "best", "luxury", "budget", "premium", "discount",
               "family", "business", "weekly", "monthly", "airport", "deals",
               "compact", "economy", "suv", "automatic", "electric", "hire",
               "one way", "long term", "weekend", "holiday", "online", "top")
_DEVICES = ("mobile", "desktop", "tablet")
_SEARCH_TYPES = ("organic", "paid", "partner")
_DOMAINS = ("rentacar-hub.com", "drivefleet.co.uk", "autorent-europe.de",
            "wheelsnow.net", "carbooker.io")


@dataclass
class SynthConfig:
    n_keywords: int = 200
    n_weeks: int = 127
    n_clusters: int = 8
    n_geo: int = 4                       # continents used, <= 7
    season_amplitude: float = 0.15
    shock_persistence: float = 0.97      # AR(1) phi
    shock_scale: float = 0.8             # stationary std of cluster shocks
    noise_scale: float = 0.4             # idiosyncratic log-CPC noise std
    heavy_tail_df: float = 5.0           # Student-t shape for the noise
    regime_shift_week: Optional[int] = None
    regime_shift_factor: float = 1.5
    regime_cluster: int = 0
    hot_cluster: Optional[int] = 0       # high-level / high-volatility cluster
    hot_level_mult: float = 2.5
    hot_shock_mult: float = 1.0
    hot_noise_mult: float = 3.0          # extra idiosyncratic noise for hot keywords
    hot_persistence: Optional[float] = None  # shock phi override for the hot cluster
    base_log_mean: float = 0.7
    base_log_std: float = 0.15
    volume_log_mean: float = 2.6
    volume_log_std: float = 1.3
    embedding_dim: int = 384
    embedding_noise: float = 0.05
    ctr: float = 0.05
    start_monday: str = "2021-01-04"
    seed: int = 0

    def __post_init__(self):
        if self.n_keywords < 2 * self.n_clusters:
            raise ValueError("need n_keywords >= 2 * n_clusters")
        if self.n_weeks < 30:
            raise ValueError("need n_weeks >= 30")
        if not 0 <= self.shock_persistence < 1:
            raise ValueError("shock_persistence must be in [0, 1)")
        if not 1 <= self.n_geo <= 7:
            raise ValueError("n_geo must be in [1, 7]")
        for name in ("season_amplitude", "shock_scale", "noise_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class SynthTruth:
    cluster_ids: np.ndarray              # (N,)
    geo_ids: np.ndarray                  # (N,)
    geo_continents: list[str]            # per geo id
    base_cpc: np.ndarray                 # (N,)
    cluster_shocks: np.ndarray           # (C, T)
    season_curves: np.ndarray            # (G, T)
    config: dict = field(default_factory=dict)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _cities_by_continent() -> dict[str, list[str]]:
    gaz = load_bundled_gazetteer()
    out: dict[str, list[str]] = {}
    for alias, entry in sorted(gaz.entries.items()):
        if entry.level == "city" and alias == entry.city:
            out.setdefault(entry.continent, []).append(alias)
    return out


def generate(cfg: SynthConfig) -> tuple[WeeklyPanel, EmbeddingMatrix,
                                        list[GeoTag], SynthTruth]:
    """Generate a synthetic weekly panel with log-additive CPC structure:
    log cpc(k,t) = log(base_k) + season_{geo(k)}(t) + shock_{cluster(k)}(t)
    + heavy-tailed noise. Deterministic for a fixed seed."""
    n, t_total, c, g = cfg.n_keywords, cfg.n_weeks, cfg.n_clusters, cfg.n_geo

    cities = _cities_by_continent()
    continents = [cont for cont in
                  ("europe", "north america", "asia", "south america",
                   "africa", "oceania", "antarctica")
                  if cities.get(cont)][:g]
    if len(continents) < g:
        raise ValueError("gazetteer lacks cities for the requested geo groups")

    rng_assign = _rng(cfg.seed, 1)
    cluster_ids = rng_assign.permutation(np.arange(n) % c)
    geo_ids = rng_assign.permutation(np.arange(n) % len(continents))

    # keyword strings: "car rental <city> <filler>", unique canonicals
    gaz = load_bundled_gazetteer()
    keywords: list[str] = []
    tags: list[GeoTag] = []
    used: set[str] = set()
    for k in range(n):
        cont = continents[geo_ids[k]]
        pool = cities[cont]
        city = pool[k % len(pool)]
        filler = _ADJECTIVES[k % len(_ADJECTIVES)]
        candidate = f"car rental {city} {filler}"
        suffix = 2
        while normalize_keyword(candidate) in used:
            candidate = f"car rental {city} {filler} {suffix}"
            suffix += 1
        canon = normalize_keyword(candidate)
        used.add(canon)
        keywords.append(canon)
        entry = gaz.entries[city]
        tags.append(GeoTag(continent=entry.continent, country=entry.country,
                           city=entry.city))

    # keep panel keyword order = sorted canonical order (ingest convention)
    order = np.argsort(np.array(keywords))
    keywords = [keywords[i] for i in order]
    tags = [tags[i] for i in order]
    cluster_ids = cluster_ids[order]
    geo_ids = geo_ids[order]

    # latent structure
    rng_base = _rng(cfg.seed, 2)
    log_base = cfg.base_log_mean + cfg.base_log_std * rng_base.standard_normal(n)
    shock_scale = np.full(c, cfg.shock_scale)
    if cfg.hot_cluster is not None:
        log_base[cluster_ids == cfg.hot_cluster] += np.log(cfg.hot_level_mult)
        shock_scale[cfg.hot_cluster] *= cfg.hot_shock_mult
    base = np.exp(log_base)

    rng_shock = _rng(cfg.seed, 3)
    phi = np.full(c, cfg.shock_persistence)
    if cfg.hot_cluster is not None and cfg.hot_persistence is not None:
        phi[cfg.hot_cluster] = cfg.hot_persistence
    innov_scale = shock_scale * np.sqrt(1.0 - phi ** 2)
    shocks = np.zeros((c, t_total))
    shocks[:, 0] = shock_scale * rng_shock.standard_normal(c)
    for t in range(1, t_total):
        shocks[:, t] = phi * shocks[:, t - 1] + innov_scale * rng_shock.standard_normal(c)

    rng_season = _rng(cfg.seed, 4)
    phases = rng_season.uniform(0, 52, size=len(continents))
    weeks_axis = np.arange(t_total)
    seasons = cfg.season_amplitude * np.sin(
        2 * np.pi * (weeks_axis[None, :] + phases[:, None]) / 52.0)

    rng_noise = _rng(cfg.seed, 5)
    if cfg.noise_scale > 0:
        df = cfg.heavy_tail_df
        unit = rng_noise.standard_t(df, size=(n, t_total)) / np.sqrt(df / (df - 2.0))
        # heavy tails, but bounded: a raw t draw far in the tail would put
        # single CPC values many orders of magnitude above the market
        unit = np.clip(unit, -6.0, 6.0)
        noise = cfg.noise_scale * unit
        if cfg.hot_cluster is not None and cfg.hot_noise_mult != 1.0:
            noise[cluster_ids == cfg.hot_cluster] *= cfg.hot_noise_mult
    else:
        noise = np.zeros((n, t_total))

    log_cpc = (np.log(base)[:, None] + seasons[geo_ids]
               + shocks[cluster_ids] + noise)
    if cfg.regime_shift_week is not None:
        hit = cluster_ids == cfg.regime_cluster
        log_cpc[np.ix_(hit, weeks_axis >= cfg.regime_shift_week)] += \
            np.log(cfg.regime_shift_factor)
    cpc_true = np.exp(log_cpc)

    # long-tailed volumes; weekly clicks Poisson around the keyword level
    rng_vol = _rng(cfg.seed, 6)
    volume = np.exp(cfg.volume_log_mean
                    + cfg.volume_log_std * rng_vol.standard_normal(n))
    clicks = rng_vol.poisson(volume[:, None] * np.exp(seasons[geo_ids])).astype(float)
    impressions = np.ceil(clicks / cfg.ctr)
    cost = cpc_true * clicks
    observed = clicks > 0
    cpc = np.where(observed, cpc_true, np.nan)

    # categorical mix: one synthetic event label per observed cell
    rng_mix = _rng(cfg.seed, 7)
    device_pick = rng_mix.integers(0, len(_DEVICES), size=(n, t_total))
    search_pick = rng_mix.integers(0, len(_SEARCH_TYPES), size=(n, t_total))
    device_counts = {
        label: ((device_pick == i) & observed).astype(float)
        for i, label in enumerate(_DEVICES)
    }
    searchtype_counts = {
        label: ((search_pick == i) & observed).astype(float)
        for i, label in enumerate(_SEARCH_TYPES)
    }

    start = date.fromisoformat(cfg.start_monday)
    week_labels = [week_label(start + timedelta(weeks=t)) for t in range(t_total)]
    panel = WeeklyPanel(
        keywords=[CanonicalKeyword(i, kw, kw) for i, kw in enumerate(keywords)],
        weeks=week_labels,
        impressions=impressions,
        clicks=clicks,
        cost=cost,
        cpc=cpc,
        observed_mask=observed.copy(),
        imputed_mask=np.zeros((n, t_total), dtype=bool),
        device_counts=device_counts,
        searchtype_counts=searchtype_counts,
    )

    rng_embed = _rng(cfg.seed, 8)
    centroids = rng_embed.standard_normal((c, cfg.embedding_dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    vectors = centroids[cluster_ids] + cfg.embedding_noise * \
        rng_embed.standard_normal((n, cfg.embedding_dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    embeddings = EmbeddingMatrix(vectors, source="synthetic")

    truth = SynthTruth(
        cluster_ids=cluster_ids, geo_ids=geo_ids,
        geo_continents=continents, base_cpc=base,
        cluster_shocks=shocks, season_curves=seasons,
        config={**asdict(cfg)},
    )
    return panel, embeddings, tags, truth


# ---------------------------------------------------------------------------
# Recovery metrics against ground truth
# ---------------------------------------------------------------------------

def intra_cluster_fraction(cluster_ids: np.ndarray,
                           neighbor_ids: np.ndarray) -> float:
    """Fraction of (node -> neighbor) edges that stay inside the node's
    true cluster."""
    same = cluster_ids[:, None] == cluster_ids[neighbor_ids]
    return float(np.mean(same))


def oracle_report(truth: SynthTruth, graph: Optional[SemanticGraph] = None,
                  neighborhoods: Optional[DtwNeighborhood] = None,
                  geo_tags: Optional[Sequence[GeoTag]] = None) -> dict:
    """Proxy-recovery metrics: intra-cluster edge fractions of the semantic
    graph and DTW neighborhoods, and continent-tag accuracy."""
    report: dict = {}
    if graph is not None:
        report["sem_intra_cluster_fraction"] = intra_cluster_fraction(
            truth.cluster_ids, graph.targets)
    if neighborhoods is not None:
        report["dtw_intra_cluster_fraction"] = intra_cluster_fraction(
            truth.cluster_ids, neighborhoods.neighbors)
    if geo_tags is not None:
        expected = [truth.geo_continents[gid] for gid in truth.geo_ids]
        hits = [tag.continent == exp for tag, exp in zip(geo_tags, expected)]
        report["geo_accuracy"] = float(np.mean(hits))
    return report


# ---------------------------------------------------------------------------
# Event / truth file emission (same formats the real pipeline consumes)
# ---------------------------------------------------------------------------

def panel_to_events(panel: WeeklyPanel, seed: int = 0) -> list[RawEvent]:
    """One raw event per observed cell, reproducing the panel exactly when
    re-aggregated."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    events = []
    mondays = [date.fromisocalendar(int(w.split("-W")[0]),
                                    int(w.split("-W")[1]), 1)
               for w in panel.weeks]
    device_labels = list(panel.device_counts) or [""]
    search_labels = list(panel.searchtype_counts) or [""]
    for i in range(panel.n_keywords):
        for t in range(panel.n_weeks):
            if not panel.observed_mask[i, t]:
                continue
            device = next((lb for lb in device_labels
                           if lb and panel.device_counts[lb][i, t] > 0), "")
            search = next((lb for lb in search_labels
                           if lb and panel.searchtype_counts[lb][i, t] > 0), "")
            events.append(RawEvent(
                keyword=panel.keywords[i].raw,
                query=panel.keywords[i].canonical,
                url=f"https://{_DOMAINS[int(rng.integers(len(_DOMAINS)))]}/offers",
                device=device, search_type=search,
                impressions=int(panel.impressions[i, t]),
                clicks=int(panel.clicks[i, t]),
                cost=float(panel.cost[i, t]),
                date=mondays[t] + timedelta(days=int(rng.integers(0, 7))),
            ))
    return events


def save_truth(truth: SynthTruth, path: str | Path) -> None:
    with open(path, "w") as fh:
        header = {"record": "config", "config": truth.config,
                  "geo_continents": truth.geo_continents}
        fh.write(json.dumps(header) + "\n")
        for i in range(len(truth.cluster_ids)):
            fh.write(json.dumps({
                "record": "keyword", "id": i,
                "cluster": int(truth.cluster_ids[i]),
                "geo": int(truth.geo_ids[i]),
                "base_cpc": float(truth.base_cpc[i]),
            }) + "\n")
