"""Checkpoint persistence: numeric blobs plus a JSON manifest describing
architecture, hyperparameters, and training range."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from ..proxies.semgraph import load_graph, save_graph
from .dcrnn import GraphForecaster, GraphForecasterConfig
from .ridge import RidgeHead, RidgeModel

logger = logging.getLogger(__name__)

MANIFEST_NAME = "checkpoint_manifest.json"


def save_checkpoint(model, out_dir: str | Path, graph=None,
                    extra: dict | None = None) -> None:
    """Persist a fitted model into `out_dir`. Accepts a RidgeModel, a
    GraphForecaster (its semantic graph must be passed alongside), or the
    string "snaive" for the parameter-free baseline."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = dict(extra or {})
    if isinstance(model, RidgeModel):
        manifest.update({
            "model": "ridge",
            "penalty": model.penalty,
            "feature_names": model.feature_names,
            "config_hash": model.config_hash,
            "horizons": list(model.horizons),
        })
        arrays = {}
        for h, head in model.heads.items():
            arrays[f"h{h}_weights"] = head.weights.astype("<f8")
            arrays[f"h{h}_intercept"] = np.float64(head.intercept)
            arrays[f"h{h}_mean"] = head.mean.astype("<f8")
            arrays[f"h{h}_std"] = head.std.astype("<f8")
        np.savez(out / "weights.npz", **arrays)
    elif isinstance(model, GraphForecaster):
        if graph is None:
            raise ValueError("saving a graph forecaster requires its graph")
        manifest.update({
            "model": "dcrnn",
            "config": asdict(model.cfg),
            "horizons": list(model.horizons),
        })
        state = {name: tensor.numpy().astype("<f4")
                 for name, tensor in model.state_dict().items()}
        np.savez(out / "state.npz", **state)
        save_graph(graph, out / "graph.csv")
    elif model == "snaive":
        manifest.update({"model": "snaive"})
    else:
        raise ValueError(f"unsupported model object {type(model).__name__}")
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))


def load_checkpoint(in_dir: str | Path):
    """Load a checkpoint directory back into a usable model object.
    Returns (kind, model) where kind is "snaive", "ridge", or "dcrnn";
    the snaive model object is None."""
    src = Path(in_dir)
    manifest = json.loads((src / MANIFEST_NAME).read_text())
    kind = manifest["model"]
    if kind == "snaive":
        return kind, None
    if kind == "ridge":
        heads = {}
        with np.load(src / "weights.npz") as blob:
            for h in manifest["horizons"]:
                heads[int(h)] = RidgeHead(
                    weights=blob[f"h{h}_weights"],
                    intercept=float(blob[f"h{h}_intercept"]),
                    mean=blob[f"h{h}_mean"],
                    std=blob[f"h{h}_std"])
        return kind, RidgeModel(heads=heads, penalty=manifest["penalty"],
                                feature_names=manifest["feature_names"],
                                config_hash=manifest["config_hash"])
    if kind == "dcrnn":
        cfg = GraphForecasterConfig(**manifest["config"])
        graph = load_graph(src / "graph.csv")
        with np.load(src / "state.npz") as blob:
            state = {name: torch.as_tensor(blob[name]) for name in blob.files}
        n_features = state["cell.gates.weight"].shape[1] - cfg.hidden
        model = GraphForecaster(graph, n_features,
                                tuple(manifest["horizons"]), cfg)
        # the node-scale buffer is reshaped to (N, 1) when set; match the
        # stored shape before the strict state load
        model.node_scale = state["node_scale"].clone()
        model.load_state_dict(state)
        model.eval()
        return kind, model
    raise ValueError(f"unknown checkpoint kind {kind!r}")
