"""Keyword embeddings: loading exported vectors and the deterministic
trigram-hashing fallback."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DIM = 384


@dataclass
class EmbeddingMatrix:
    vectors: np.ndarray            # (N, D), rows unit-norm
    source: str                    # "exported" | "fallback" | "synthetic"
    fallback_count: int = 0

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def check_invariants(self, tol: float = 1e-6) -> None:
        norms = np.linalg.norm(self.vectors, axis=1)
        assert np.all(np.abs(norms - 1.0) <= tol), "rows not unit-norm"


def _trigrams(text: str) -> list[str]:
    padded = f" {text} "
    return [padded[i:i + 3] for i in range(len(padded) - 2)]


def hash_embed(keyword: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Signed character-trigram feature hashing into `dim` buckets,
    L2-normalized. Platform-independent (keyed on blake2b digests)."""
    if dim < 8:
        raise ValueError("dim must be >= 8")
    if not keyword:
        raise ValueError("empty keyword")
    vec = np.zeros(dim)
    for gram in _trigrams(keyword):
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        bucket = value % dim
        sign = 1.0 if (value >> 32) & 1 else -1.0
        vec[bucket] += sign
    norm = np.linalg.norm(vec)
    if norm == 0:
        # all trigram signs cancelled; fall back to a one-hot on the text hash
        digest = hashlib.blake2b(keyword.encode("utf-8"), digest_size=8).digest()
        vec[int.from_bytes(digest, "little") % dim] = 1.0
        norm = 1.0
    return vec / norm


def save_embeddings(keywords: Iterable[str], vectors: np.ndarray,
                    path: str | Path) -> None:
    """Write the line-delimited {keyword, vector} embedding format."""
    with open(path, "w") as fh:
        for kw, vec in zip(keywords, vectors):
            fh.write(json.dumps({"keyword": kw, "vector": [float(x) for x in vec]}))
            fh.write("\n")


def load_embeddings(path: str | Path, keywords: list[str],
                    dim: int = DEFAULT_DIM) -> EmbeddingMatrix:
    """Load exported embeddings aligned to `keywords` order. Missing or
    zero-vector rows fall back to hash_embed with a warning count; a
    dimension mismatch across records is fatal."""
    records: dict[str, np.ndarray] = {}
    file_dim: int | None = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            vec = np.asarray(obj["vector"], dtype=float)
            if file_dim is None:
                file_dim = vec.size
            elif vec.size != file_dim:
                raise ValueError(
                    f"dimension mismatch at line {line_no}: {vec.size} != {file_dim}")
            records[obj["keyword"]] = vec
    if not records:
        raise ValueError(f"empty embedding file: {path}")
    assert file_dim is not None

    matrix = np.zeros((len(keywords), file_dim))
    fallback = 0
    for i, kw in enumerate(keywords):
        vec = records.get(kw)
        if vec is not None:
            norm = np.linalg.norm(vec)
            if norm > 0:
                matrix[i] = vec / norm
                continue
            logger.warning("zero vector for %r; using fallback", kw)
        matrix[i] = hash_embed(kw, file_dim)
        fallback += 1
    if fallback:
        logger.warning("%d/%d keywords missing from %s; hashed fallback used",
                       fallback, len(keywords), path)
    return EmbeddingMatrix(matrix, source="exported", fallback_count=fallback)


def fallback_embeddings(keywords: list[str], dim: int = DEFAULT_DIM) -> EmbeddingMatrix:
    """Full-fallback matrix for runs without an exported embedding file."""
    matrix = np.stack([hash_embed(kw, dim) for kw in keywords])
    return EmbeddingMatrix(matrix, source="fallback", fallback_count=len(keywords))
