"""Banded dynamic-time-warping distances and behavioral neighborhoods."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

logger = logging.getLogger(__name__)

DEFAULT_NEIGHBORS = 10
DEFAULT_BAND = 8
MIN_TRAINING_WEEKS = 8


@njit(cache=True)
def _banded_dtw_sq(a: np.ndarray, b: np.ndarray, r: int) -> float:
    """Accumulated squared-cost DTW restricted to |i - j| <= r."""
    n = a.shape[0]
    inf = np.inf
    prev = np.full(n + 1, inf)
    cur = np.full(n + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = inf
        lo = max(1, i - r)
        hi = min(n, i + r)
        for j in range(lo, hi + 1):
            d = a[i - 1] - b[j - 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = d * d + best
        prev, cur = cur, prev
    return prev[n]


def dtw_distance(a: np.ndarray, b: np.ndarray, r: int) -> float:
    """Sakoe-Chiba banded DTW with squared pointwise cost and the
    symmetric match/insert/delete step pattern; returns the square root
    of the accumulated cost. Series must be equal-length."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("series must be equal-length 1-D with length >= 1")
    if r < 0:
        raise ValueError("band radius must be >= 0")
    cost = _banded_dtw_sq(a, b, int(r))
    if not np.isfinite(cost):
        raise RuntimeError("no feasible warping path (banded DP all-inf)")
    return float(np.sqrt(cost))


def z_normalize(series: np.ndarray) -> np.ndarray:
    """Mean-0 / std-1 scaling; constant series map to all-zeros."""
    x = np.asarray(series, dtype=float)
    std = x.std()
    if std == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / std


@dataclass
class DtwNeighborhood:
    m: int
    band: int
    neighbors: np.ndarray      # (N, m) int ids, ascending distance
    distances: np.ndarray      # (N, m)
    train_start: int
    train_end: int

    @property
    def n_keywords(self) -> int:
        return self.neighbors.shape[0]

    def check_invariants(self) -> None:
        n = self.n_keywords
        assert self.neighbors.shape == self.distances.shape == (n, self.m)
        assert np.all(self.distances >= 0)
        assert np.all(np.diff(self.distances, axis=1) >= 0), "not ascending"
        for i in range(n):
            assert i not in self.neighbors[i], "self as neighbor"


@njit(cache=True)
def _all_pairs_dtw(series: np.ndarray, r: int) -> np.ndarray:
    n = series.shape[0]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = np.sqrt(_banded_dtw_sq(series[i], series[j], r))
            dist[i, j] = d
            dist[j, i] = d
    return dist


def build_dtw_neighborhoods(
    panel,
    train_start: int,
    train_end: int,
    m: int = DEFAULT_NEIGHBORS,
    band: int = DEFAULT_BAND,
) -> DtwNeighborhood:
    """m nearest neighbors per keyword under banded DTW of z-normalized
    training-range CPC (gap-imputed). Ties broken by lower keyword id.
    Only columns in [train_start, train_end) are read (leakage guard)."""
    if train_end - train_start < MIN_TRAINING_WEEKS:
        raise ValueError(
            f"training range must span >= {MIN_TRAINING_WEEKS} weeks")
    cpc = panel.cpc[:, train_start:train_end]
    if np.isnan(cpc).any():
        raise ValueError("CPC gaps in training range; run impute_gaps first")
    n = cpc.shape[0]
    if not (0 < m < n):
        raise ValueError(f"m={m} must be in (0, {n})")
    series = np.ascontiguousarray(
        np.stack([z_normalize(cpc[i]) for i in range(n)]))
    dist = _all_pairs_dtw(series, int(band))
    np.fill_diagonal(dist, np.inf)
    order = np.lexsort((np.broadcast_to(np.arange(n), (n, n)), dist), axis=1)
    neighbors = order[:, :m].astype(np.int64)
    distances = np.take_along_axis(dist, neighbors, axis=1)
    return DtwNeighborhood(m=m, band=band, neighbors=neighbors,
                           distances=distances,
                           train_start=train_start, train_end=train_end)


def save_neighborhoods(nb: DtwNeighborhood, path) -> None:
    np.savez(path, m=nb.m, band=nb.band, neighbors=nb.neighbors,
             distances=nb.distances, train_start=nb.train_start,
             train_end=nb.train_end)


def load_neighborhoods(path) -> DtwNeighborhood:
    with np.load(path) as blob:
        nb = DtwNeighborhood(
            m=int(blob["m"]), band=int(blob["band"]),
            neighbors=blob["neighbors"], distances=blob["distances"],
            train_start=int(blob["train_start"]),
            train_end=int(blob["train_end"]))
    nb.check_invariants()
    return nb
