"""Batched sentence-encoder export to the line-delimited embedding format.

Output grammar (one record per line, input order, unique keywords):

    {"keyword": "<canonical text>", "vector": [<D floats>]}

Vectors are L2-normalized before writing.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
DEFAULT_BATCH = 256

FALLBACK_HINT = ("model unavailable; run the core pipeline with "
                 "--embeddings fallback to use its built-in hashed embedder")


class ModelUnavailableError(RuntimeError):
    """The requested sentence-encoder could not be loaded."""


@dataclass(frozen=True)
class ExportSummary:
    count: int
    dim: int
    model: str
    duplicates_dropped: int


def read_keywords(path: str | Path) -> tuple[list[str], int]:
    """One canonical keyword per line; blank lines skipped, duplicates
    dropped keeping first occurrence. Returns (keywords, dropped)."""
    seen: set[str] = set()
    keywords: list[str] = []
    dropped = 0
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        keyword = raw.strip()
        if not keyword:
            continue
        if keyword in seen:
            dropped += 1
            continue
        seen.add(keyword)
        keywords.append(keyword)
    if not keywords:
        raise ValueError(f"no keywords found in {path}")
    if dropped:
        logger.warning("%d duplicate keyword lines dropped", dropped)
    return keywords, dropped


def _load_encoder(model_name: str):
    try:
        import torch
        from sentence_transformers import SentenceTransformer

        torch.manual_seed(0)
        encoder = SentenceTransformer(model_name, device="cpu")
        encoder.eval()
        return encoder
    except Exception as exc:  # noqa: BLE001 - any load failure is terminal
        raise ModelUnavailableError(
            f"could not load encoder {model_name!r}: {exc}; "
            f"{FALLBACK_HINT}") from exc


def encode(keywords: list[str], model_name: str,
           batch_size: int = DEFAULT_BATCH) -> np.ndarray:
    """Deterministic batched encoding; rows L2-normalized."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    encoder = _load_encoder(model_name)
    import torch

    with torch.no_grad():
        vectors = encoder.encode(keywords, batch_size=batch_size,
                                 convert_to_numpy=True,
                                 normalize_embeddings=True,
                                 show_progress_bar=False)
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValueError("encoder produced a zero vector")
    return vectors / norms


def write_records(keywords: list[str], vectors: np.ndarray,
                  out_path: str | Path) -> None:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for keyword, vector in zip(keywords, vectors):
            fh.write(json.dumps({"keyword": keyword,
                                 "vector": [float(x) for x in vector]}))
            fh.write("\n")


def export(keywords_path: str | Path, model_name: str, out_path: str | Path,
           batch_size: int = DEFAULT_BATCH) -> ExportSummary:
    """Read keywords, encode, and write one record per unique keyword in
    input order."""
    keywords, dropped = read_keywords(keywords_path)
    vectors = encode(keywords, model_name, batch_size)
    write_records(keywords, vectors, out_path)
    return ExportSummary(count=len(keywords), dim=vectors.shape[1],
                         model=model_name, duplicates_dropped=dropped)
