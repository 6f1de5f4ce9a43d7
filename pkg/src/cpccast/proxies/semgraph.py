"""Fixed directed kNN graph over keyword embeddings, row-normalized."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingMatrix

logger = logging.getLogger(__name__)

DEFAULT_K = 10


@dataclass
class SemanticGraph:
    k: int
    targets: np.ndarray        # (N, k) int neighbor ids, sorted by rank
    weights: np.ndarray        # (N, k) row-normalized, each row sums to 1
    construction: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.targets.shape[0]

    def to_dense(self) -> np.ndarray:
        """Dense row-stochastic adjacency (N, N)."""
        n = self.n_nodes
        dense = np.zeros((n, n))
        rows = np.repeat(np.arange(n), self.k)
        dense[rows, self.targets.ravel()] = self.weights.ravel()
        return dense

    def check_invariants(self, tol: float = 1e-9) -> None:
        n = self.n_nodes
        assert self.targets.shape == self.weights.shape == (n, self.k)
        for i in range(n):
            assert len(set(self.targets[i])) == self.k, "duplicate out-edges"
            assert i not in self.targets[i], "self-loop"
        assert np.all(self.weights >= 0)
        assert np.all(np.abs(self.weights.sum(axis=1) - 1.0) <= tol)


def build_semantic_graph(embeddings: EmbeddingMatrix, k: int = DEFAULT_K) -> SemanticGraph:
    """k highest-cosine neighbors per node (self excluded), ties broken by
    lower keyword id. Edge weights are cosines clamped at 0, then each row
    is normalized to sum 1; an all-zero row falls back to uniform 1/k."""
    if k <= 0:
        raise ValueError("k must be positive")
    vectors = embeddings.vectors
    n = vectors.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be < number of keywords {n}")
    sims = vectors @ vectors.T
    np.fill_diagonal(sims, -np.inf)
    # lexsort: primary key similarity descending, ties by lower id
    order = np.lexsort((np.broadcast_to(np.arange(n), (n, n)), -sims), axis=1)
    targets = order[:, :k].astype(np.int64)
    raw = np.take_along_axis(sims, targets, axis=1)
    weights = np.maximum(raw, 0.0)
    row_sums = weights.sum(axis=1)
    zero_rows = row_sums <= 0
    weights[zero_rows] = 1.0 / k
    row_sums[zero_rows] = 1.0
    weights = weights / row_sums[:, None]
    if zero_rows.any():
        logger.warning("%d rows had no positive cosine; uniform weights used",
                       int(zero_rows.sum()))
    return SemanticGraph(
        k=k, targets=targets, weights=weights,
        construction={"similarity": "cosine", "tie_rule": "lower_id",
                      "clamp": "max(cos, 0)", "source": embeddings.source},
    )


def save_graph(graph: SemanticGraph, path: str | Path) -> None:
    """Edge-list CSV export: src, dst, weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "weight"])
        for i in range(graph.n_nodes):
            for j in range(graph.k):
                writer.writerow([i, int(graph.targets[i, j]),
                                 repr(float(graph.weights[i, j]))])


def load_graph(path: str | Path) -> SemanticGraph:
    edges: dict[int, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            edges.setdefault(int(row["src"]), []).append(
                (int(row["dst"]), float(row["weight"])))
    n = max(edges) + 1
    k = len(edges[0])
    targets = np.zeros((n, k), dtype=np.int64)
    weights = np.zeros((n, k))
    for i in range(n):
        for j, (dst, w) in enumerate(edges[i]):
            targets[i, j] = dst
            weights[i, j] = w
    return SemanticGraph(k=k, targets=targets, weights=weights,
                         construction={"loaded_from": str(path)})
