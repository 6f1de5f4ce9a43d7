"""Keyword x ISO-week panel: weekly aggregation, CPC target, keyword
selection, gap imputation, and descriptive statistics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .ingest import CanonicalKeyword, RawEvent, canonicalize_keywords, normalize_keyword

logger = logging.getLogger(__name__)

DEFAULT_MIN_WEEKS = 110
DEFAULT_WINDOW_WEEKS = 127


# ---------------------------------------------------------------------------
# ISO-week helpers (weeks are keyed by their Monday)
# ---------------------------------------------------------------------------

def week_monday(day: date) -> date:
    return day - timedelta(days=day.isoweekday() - 1)

def week_label(monday: date) -> str:
    iso = monday.isocalendar()
    return f"{iso[0]}-W{iso[1]:02d}"

def label_to_monday(label: str) -> date:
    year, week = label.split("-W")
    return date.fromisocalendar(int(year), int(week), 1)

def week_range(first: date, last: date) -> list[date]:
    """Contiguous Mondays from the week of `first` through the week of
    `last`, inclusive."""
    start = week_monday(first)
    end = week_monday(last)
    n = (end - start).days // 7 + 1
    return [start + timedelta(weeks=i) for i in range(n)]


# ---------------------------------------------------------------------------
# Panel container
# ---------------------------------------------------------------------------

@dataclass
class WeeklyPanel:
    keywords: list[CanonicalKeyword]
    weeks: list[str]                       # ISO labels, strictly increasing
    impressions: np.ndarray                # (N, T) float64
    clicks: np.ndarray
    cost: np.ndarray
    cpc: np.ndarray                        # NaN where adclicks_sum == 0
    observed_mask: np.ndarray              # (N, T) bool, any event in cell
    imputed_mask: np.ndarray               # (N, T) bool, filled by impute_gaps
    device_counts: dict[str, np.ndarray] = field(default_factory=dict)
    searchtype_counts: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_keywords(self) -> int:
        return len(self.keywords)

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)

    @property
    def canonicals(self) -> list[str]:
        return [k.canonical for k in self.keywords]

    def value_mask(self) -> np.ndarray:
        """Cells with a genuinely observed (non-imputed) CPC value."""
        return ~np.isnan(self.cpc) & ~self.imputed_mask

    def copy(self) -> "WeeklyPanel":
        return WeeklyPanel(
            keywords=list(self.keywords),
            weeks=list(self.weeks),
            impressions=self.impressions.copy(),
            clicks=self.clicks.copy(),
            cost=self.cost.copy(),
            cpc=self.cpc.copy(),
            observed_mask=self.observed_mask.copy(),
            imputed_mask=self.imputed_mask.copy(),
            device_counts={k: v.copy() for k, v in self.device_counts.items()},
            searchtype_counts={k: v.copy() for k, v in self.searchtype_counts.items()},
        )

    def check_invariants(self) -> None:
        assert self.impressions.shape == (self.n_keywords, self.n_weeks)
        mondays = [label_to_monday(w) for w in self.weeks]
        assert all(b > a for a, b in zip(mondays, mondays[1:])), "weeks not increasing"
        defined = ~np.isnan(self.cpc) & ~self.imputed_mask
        assert np.array_equal(defined, (self.clicks > 0) & ~self.imputed_mask)
        recon = np.where(defined, self.cpc * self.clicks, self.cost)
        assert np.allclose(recon[defined], self.cost[defined],
                           rtol=1e-9, atol=1e-12), "cpc * clicks != cost"
        assert not np.any(self.imputed_mask & np.isnan(self.cpc))


def aggregate_weekly(events: Iterable[RawEvent]) -> WeeklyPanel:
    """Sum events to the keyword x ISO-week grid and derive weekly CPC as
    cost_sum / clicks_sum where clicks_sum > 0."""
    events = list(events)
    keywords = canonicalize_keywords(ev.keyword for ev in events)
    canon_idx = {k.canonical: k.id for k in keywords}
    if events:
        mondays = week_range(min(ev.date for ev in events), max(ev.date for ev in events))
    else:
        mondays = []
    week_idx = {m: t for t, m in enumerate(mondays)}
    n, t_total = len(keywords), len(mondays)

    shape = (n, t_total)
    impressions = np.zeros(shape)
    clicks = np.zeros(shape)
    cost = np.zeros(shape)
    observed = np.zeros(shape, dtype=bool)
    device_counts: dict[str, np.ndarray] = {}
    searchtype_counts: dict[str, np.ndarray] = {}

    for ev in events:
        canon = normalize_keyword(ev.keyword)
        if canon not in canon_idx:
            continue
        i = canon_idx[canon]
        t = week_idx[week_monday(ev.date)]
        impressions[i, t] += ev.impressions
        clicks[i, t] += ev.clicks or 0
        cost[i, t] += ev.cost or 0.0
        observed[i, t] = True
        if ev.device:
            grid = device_counts.setdefault(ev.device, np.zeros(shape))
            grid[i, t] += 1
        if ev.search_type:
            grid = searchtype_counts.setdefault(ev.search_type, np.zeros(shape))
            grid[i, t] += 1

    with np.errstate(divide="ignore", invalid="ignore"):
        cpc = np.where(clicks > 0, cost / np.where(clicks > 0, clicks, 1.0), np.nan)

    return WeeklyPanel(
        keywords=keywords,
        weeks=[week_label(m) for m in mondays],
        impressions=impressions,
        clicks=clicks,
        cost=cost,
        cpc=cpc,
        observed_mask=observed,
        imputed_mask=np.zeros(shape, dtype=bool),
        device_counts=dict(sorted(device_counts.items())),
        searchtype_counts=dict(sorted(searchtype_counts.items())),
    )


def _take_keywords(panel: WeeklyPanel, keep: np.ndarray, cols: slice) -> WeeklyPanel:
    kept = [k for k, f in zip(panel.keywords, keep) if f]
    reindexed = [replace(k, id=i) for i, k in enumerate(kept)]
    return WeeklyPanel(
        keywords=reindexed,
        weeks=panel.weeks[cols],
        impressions=panel.impressions[keep][:, cols].copy(),
        clicks=panel.clicks[keep][:, cols].copy(),
        cost=panel.cost[keep][:, cols].copy(),
        cpc=panel.cpc[keep][:, cols].copy(),
        observed_mask=panel.observed_mask[keep][:, cols].copy(),
        imputed_mask=panel.imputed_mask[keep][:, cols].copy(),
        device_counts={k: v[keep][:, cols].copy() for k, v in panel.device_counts.items()},
        searchtype_counts={k: v[keep][:, cols].copy() for k, v in panel.searchtype_counts.items()},
    )


def select_keywords(
    panel: WeeklyPanel,
    min_weeks: int = DEFAULT_MIN_WEEKS,
    window: int = DEFAULT_WINDOW_WEEKS,
) -> WeeklyPanel:
    """Trim to the trailing `window` weeks and retain keywords observed in
    at least `min_weeks` of them."""
    if window > panel.n_weeks:
        raise ValueError(
            f"window {window} exceeds panel length {panel.n_weeks}")
    cols = slice(panel.n_weeks - window, panel.n_weeks)
    counts = panel.observed_mask[:, cols].sum(axis=1)
    keep = counts >= min_weeks
    out = _take_keywords(panel, keep, cols)
    logger.info("selected %d/%d keywords (>= %d observed weeks in last %d)",
                out.n_keywords, panel.n_keywords, min_weeks, window)
    return out


def impute_gaps(panel: WeeklyPanel) -> tuple[WeeklyPanel, np.ndarray]:
    """Fill undefined CPC cells: linear interpolation for interior gaps of
    length <= 2, last-observation-carry-forward for longer and trailing
    gaps, backfill for leading gaps. Volume fields are untouched. Keywords
    with no observed CPC at all are dropped with a warning."""
    out = panel.copy()
    n, t_total = out.cpc.shape
    mask = np.zeros((n, t_total), dtype=bool)
    dead = np.zeros(n, dtype=bool)
    for i in range(n):
        row = out.cpc[i]
        defined = np.flatnonzero(~np.isnan(row))
        if defined.size == 0:
            dead[i] = True
            logger.warning("keyword %r has no observed CPC; dropping",
                           out.keywords[i].canonical)
            continue
        first, last = defined[0], defined[-1]
        if first > 0:
            row[:first] = row[first]
            mask[i, :first] = True
        for a, b in zip(defined, defined[1:]):
            gap = b - a - 1
            if gap == 0:
                continue
            if gap <= 2:
                row[a + 1:b] = np.interp(np.arange(a + 1, b), [a, b], [row[a], row[b]])
            else:
                row[a + 1:b] = row[a]
            mask[i, a + 1:b] = True
        if last < t_total - 1:
            row[last + 1:] = row[last]
            mask[i, last + 1:] = True
    if dead.any():
        keep = ~dead
        out = _take_keywords(out, keep, slice(0, t_total))
        mask = mask[keep]
    out.imputed_mask |= mask
    return out, mask


# ---------------------------------------------------------------------------
# Panel statistics
# ---------------------------------------------------------------------------

@dataclass
class PanelStats:
    """Per-keyword and pooled CPC statistics over a week interval,
    computed on observed (non-imputed) cells only."""
    mean_cpc: np.ndarray          # (N,) NaN where no observed cells
    std_cpc: np.ndarray           # sample (n-1) std, NaN where < 2 cells
    cv: np.ndarray                # std/mean, NaN where undefined
    cv_defined: np.ndarray        # (N,) bool
    n_cells: np.ndarray           # (N,) observed cell counts
    pooled_mean: float
    pooled_max: float
    pooled_p99: float
    pooled_skewness: float
    week_start: int
    week_end: int


def sample_skewness(values: np.ndarray) -> float:
    """Moment-based skewness g1 = m3 / m2^(3/2)."""
    x = np.asarray(values, dtype=float)
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    if m2 == 0:
        return 0.0
    m3 = np.mean((x - m) ** 3)
    return float(m3 / m2 ** 1.5)


def compute_stats(panel: WeeklyPanel, week_start: int, week_end: int) -> PanelStats:
    """Statistics over panel columns [week_start, week_end) (indices)."""
    if not (0 <= week_start < week_end <= panel.n_weeks):
        raise ValueError(f"bad week range [{week_start}, {week_end})")
    cpc = panel.cpc[:, week_start:week_end]
    valid = panel.value_mask()[:, week_start:week_end]
    n = panel.n_keywords
    mean = np.full(n, np.nan)
    std = np.full(n, np.nan)
    cv = np.full(n, np.nan)
    cv_defined = np.zeros(n, dtype=bool)
    counts = valid.sum(axis=1)
    pooled = []
    for i in range(n):
        vals = cpc[i][valid[i]]
        pooled.append(vals)
        if vals.size == 0:
            continue
        mean[i] = vals.mean()
        if vals.size >= 2:
            std[i] = vals.std(ddof=1)
        if counts[i] >= 4 and mean[i] != 0 and vals.size >= 2:
            cv[i] = std[i] / mean[i]
            cv_defined[i] = True
    pooled_all = np.concatenate(pooled) if pooled else np.array([])
    if pooled_all.size == 0:
        raise ValueError("no observed CPC cells in range")
    return PanelStats(
        mean_cpc=mean, std_cpc=std, cv=cv, cv_defined=cv_defined, n_cells=counts,
        pooled_mean=float(pooled_all.mean()),
        pooled_max=float(pooled_all.max()),
        pooled_p99=float(np.percentile(pooled_all, 99)),
        pooled_skewness=sample_skewness(pooled_all),
        week_start=week_start, week_end=week_end,
    )


# ---------------------------------------------------------------------------
# Persistence: wide CSV per metric + manifest
# ---------------------------------------------------------------------------

_GRID_FILES = {
    "impressions": "impressions.csv",
    "clicks": "clicks.csv",
    "cost": "cost.csv",
    "cpc": "cpc.csv",
}


def _grid_to_csv(grid: np.ndarray, panel: WeeklyPanel, path: Path) -> None:
    df = pd.DataFrame(grid, index=panel.canonicals, columns=panel.weeks)
    df.index.name = "keyword"
    df.to_csv(path, float_format="%.17g")


def save_panel(panel: WeeklyPanel, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for attr, fname in _GRID_FILES.items():
        _grid_to_csv(getattr(panel, attr), panel, out / fname)
    _grid_to_csv(panel.observed_mask.astype(int), panel, out / "observed_mask.csv")
    _grid_to_csv(panel.imputed_mask.astype(int), panel, out / "imputed_mask.csv")
    np.savez(out / "counts.npz",
             **{f"device::{k}": v for k, v in panel.device_counts.items()},
             **{f"searchtype::{k}": v for k, v in panel.searchtype_counts.items()})
    manifest = {
        "keywords": [{"id": k.id, "raw": k.raw, "canonical": k.canonical}
                     for k in panel.keywords],
        "weeks": panel.weeks,
        "files": {**_GRID_FILES,
                  "observed_mask": "observed_mask.csv",
                  "imputed_mask": "imputed_mask.csv",
                  "counts": "counts.npz"},
    }
    (out / "panel_manifest.json").write_text(json.dumps(manifest, indent=1))


def load_panel(in_dir: str | Path) -> WeeklyPanel:
    src = Path(in_dir)
    manifest = json.loads((src / "panel_manifest.json").read_text())
    keywords = [CanonicalKeyword(k["id"], k["raw"], k["canonical"])
                for k in manifest["keywords"]]
    weeks = manifest["weeks"]

    def read_grid(fname: str) -> np.ndarray:
        df = pd.read_csv(src / fname, index_col=0, float_precision="round_trip")
        return df.to_numpy(dtype=float)

    device_counts: dict[str, np.ndarray] = {}
    searchtype_counts: dict[str, np.ndarray] = {}
    with np.load(src / "counts.npz") as npz:
        for key in npz.files:
            kind, label = key.split("::", 1)
            target = device_counts if kind == "device" else searchtype_counts
            target[label] = npz[key]
    return WeeklyPanel(
        keywords=keywords,
        weeks=weeks,
        impressions=read_grid("impressions.csv"),
        clicks=read_grid("clicks.csv"),
        cost=read_grid("cost.csv"),
        cpc=read_grid("cpc.csv"),
        observed_mask=read_grid("observed_mask.csv").astype(bool),
        imputed_mask=read_grid("imputed_mask.csv").astype(bool),
        device_counts=device_counts,
        searchtype_counts=searchtype_counts,
    )
