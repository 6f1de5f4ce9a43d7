"""Command-line entry point: pipeline stages, run manifests for
provenance, and an end-to-end demo on synthetic data."""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import __version__, ingest as ing, panel as pnl, synth as syn
from .evaluation import (DEFAULT_TEST_FRACTION, chronological_split, evaluate,
                         frontier_segment, run_ablation, scored_test_origins)
from .features import (FeatureConfig, build_features, load_features,
                       save_features)
from .models import (ForecastTask, GraphForecasterConfig, fit_graph_forecaster,
                     fit_ridge, load_checkpoint, load_forecasts, predict_graph,
                     predict_ridge, save_checkpoint, save_forecasts,
                     seasonal_naive)
from .proxies import (build_dtw_neighborhoods, build_semantic_graph,
                      fallback_embeddings, load_embeddings, load_geo_tags,
                      load_graph, load_neighborhoods, save_embeddings,
                      save_geo_tags, save_graph, save_neighborhoods,
                      tag_geography)
from .proxies.geo import Gazetteer, load_bundled_gazetteer

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Provenance and error plumbing
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_tree(target: Path, skip: tuple[str, ...] = ()) -> dict[str, str]:
    if target.is_file():
        return {target.name: _sha256(target)}
    out = {}
    for path in sorted(target.rglob("*")):
        if path.is_file() and path.name not in skip:
            out[str(path.relative_to(target))] = _sha256(path)
    return out


MANIFEST_FILE = "run_manifest.json"


def _write_manifest(command: str, config: dict, inputs: list[Path],
                    out: Path, seed: int | None, started: float) -> None:
    """One manifest per artifact directory (or <file>.manifest.json for
    single-file outputs) recording config, content hashes, and timing."""
    manifest = {
        "command": command,
        "config": {k: (str(v) if isinstance(v, Path) else v)
                   for k, v in config.items()},
        "input_hashes": {str(p): _hash_tree(p, skip=(MANIFEST_FILE,))
                         for p in inputs if p is not None},
        "output_hashes": _hash_tree(out, skip=(MANIFEST_FILE,)),
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - started, 3),
    }
    dest = out / MANIFEST_FILE if out.is_dir() else \
        out.with_name(out.name + ".manifest.json")
    dest.write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _stage(fn):
    """Map stage failures to single-line machine-parsable error tags:
    E_IO for filesystem problems, E_CONFIG for invalid settings, E_RUNTIME
    for everything else. Fatal errors exit 1; usage errors exit 2."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"E_IO: {exc}", err=True)
            sys.exit(1)
        except (ValueError, KeyError, TypeError) as exc:
            click.echo(f"E_CONFIG: {exc}", err=True)
            sys.exit(1)
        except Exception as exc:  # noqa: BLE001 - boundary of the CLI
            click.echo(f"E_RUNTIME: {exc}", err=True)
            sys.exit(1)
    return wrapper


def _read_config_file(path: str | None) -> dict[str, str]:
    """Flat key-value text: one `key = value` per line, '#' comments."""
    if path is None:
        return {}
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(value: str, kind):
    if kind is bool:
        return value.lower() in ("1", "true", "yes", "on")
    return kind(value)


def _synth_config(config_file: str | None, seed: int) -> syn.SynthConfig:
    """Built-in defaults, overridden by the config file, overridden by the
    explicit --seed flag."""
    raw = _read_config_file(config_file)
    fields = {f.name: f for f in dataclasses.fields(syn.SynthConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ValueError(f"unknown synth config key {key!r}")
        default = fields[key].default
        kind = type(default) if default is not None else float
        kwargs[key] = _coerce(value, kind)
    kwargs["seed"] = seed
    return syn.SynthConfig(**kwargs)


def _set_threads(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise click.BadParameter("--threads must be >= 1")
    os.environ["OMP_NUM_THREADS"] = str(threads)
    try:
        import numba
        numba.set_num_threads(threads)
    except (ImportError, ValueError):
        pass
    try:
        import torch
        torch.set_num_threads(threads)
    except ImportError:
        pass


def _week_index(panel: pnl.WeeklyPanel, label: str | None,
                fallback: int) -> int:
    if label is None:
        return fallback
    if label not in panel.weeks:
        raise ValueError(f"week {label!r} not in panel range "
                         f"{panel.weeks[0]}..{panel.weeks[-1]}")
    return panel.weeks.index(label)


def _load_gazetteer(path: str | None) -> Gazetteer:
    return Gazetteer.from_csv(path) if path else load_bundled_gazetteer()


def _parse_horizons(text: str) -> tuple[int, ...]:
    try:
        horizons = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ValueError(f"bad horizon list {text!r}; expected e.g. 1,6,12")
    return horizons


# ---------------------------------------------------------------------------
# Group
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(__version__)
@click.option("--threads", type=int, default=None, envvar="CPCC_THREADS",
              help="Worker threads for DTW / model stages "
                   "(default: all cores; env fallback CPCC_THREADS).")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
def main(threads: int | None, verbose: bool) -> None:
    """Competition-aware CPC forecasting pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    _set_threads(threads)


# ---------------------------------------------------------------------------
# ingest / aggregate
# ---------------------------------------------------------------------------

@main.command("ingest")
@click.option("--input", "input_path", required=True,
              type=click.Path(dir_okay=False),
              help="Line-delimited raw ad-event records.")
@click.option("--output", "output_path", required=True, type=click.Path(),
              help="Filtered event stream destination.")
@click.option("--max-missing", default=ing.DEFAULT_MAX_MISSING_DATES,
              show_default=True,
              help="Domain-quality threshold on missing daily dates.")
@click.option("--min-mentions", default=ing.DEFAULT_MIN_MENTIONS,
              show_default=True,
              help="Domain-quality threshold on total mentions.")
@_stage
def ingest_cmd(input_path, output_path, max_missing, min_mentions):
    """Parse, normalize, and filter raw ad events."""
    started = time.time()
    with open(input_path) as fh:
        events, rejections = ing.parse_events(fh)
    relevant = ing.filter_relevant(events)
    deduped = ing.dedupe_events(relevant)
    kept, stats = ing.filter_domains(deduped, max_missing=max_missing,
                                     min_mentions=min_mentions)
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for ev in kept:
            fh.write(ing.serialize_event(ev) + "\n")
    rej_path = out.with_name(out.name + ".rejects.log")
    with open(rej_path, "w") as fh:
        for rej in rejections:
            fh.write(f"{rej.line_no}\t{rej.reason}\n")
    click.echo(f"parsed {len(events)} events ({len(rejections)} rejected "
               f"lines), kept {len(kept)} after filters "
               f"({len(stats)} domains seen)")
    _write_manifest("ingest", {"input": input_path, "max_missing": max_missing,
                               "min_mentions": min_mentions},
                    [Path(input_path)], out, None, started)


@main.command("aggregate")
@click.option("--events", "events_path", required=True,
              type=click.Path(dir_okay=False),
              help="Filtered event stream (ingest output).")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Panel output directory.")
@click.option("--min-weeks", default=pnl.DEFAULT_MIN_WEEKS, show_default=True,
              help="Minimum observed weeks for a keyword to be kept.")
@click.option("--window", default=pnl.DEFAULT_WINDOW_WEEKS, show_default=True,
              help="Trailing observation window in weeks.")
@_stage
def aggregate_cmd(events_path, out_dir, min_weeks, window):
    """Build the weekly keyword panel from events."""
    started = time.time()
    with open(events_path) as fh:
        events, rejections = ing.parse_events(fh)
    if rejections:
        logger.warning("%d malformed lines skipped", len(rejections))
    panel = pnl.aggregate_weekly(events)
    panel = pnl.select_keywords(panel, min_weeks=min_weeks, window=window)
    panel, imputed = pnl.impute_gaps(panel)
    panel.check_invariants()
    out = Path(out_dir)
    pnl.save_panel(panel, out)
    click.echo(f"panel: {panel.n_keywords} keywords x {panel.n_weeks} weeks "
               f"({int(imputed.sum())} imputed cells)")
    _write_manifest("aggregate", {"events": events_path,
                                  "min_weeks": min_weeks, "window": window},
                    [Path(events_path)], out, None, started)


# ---------------------------------------------------------------------------
# proxies / features
# ---------------------------------------------------------------------------

@main.command("build-proxies")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False),
              help="Panel directory (aggregate output).")
@click.option("--embeddings", "embeddings_path", default="fallback",
              show_default=True,
              help="Exported embedding file, or 'fallback' for hashed "
                   "character-trigram embeddings.")
@click.option("--k", default=10, show_default=True,
              help="Semantic kNN out-degree.")
@click.option("--dtw-m", default=10, show_default=True,
              help="Behavioral neighborhood size.")
@click.option("--dtw-band", default=8, show_default=True,
              help="Sakoe-Chiba band radius in weeks.")
@click.option("--gazetteer", "gazetteer_path", default=None,
              type=click.Path(dir_okay=False),
              help="Gazetteer CSV (default: bundled snapshot).")
@click.option("--train-end", "train_end_label", default=None,
              help="First excluded ISO week (e.g. 2023-W10); default is the "
                   "start of the chronological 20% test split.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Proxy artifact directory.")
@_stage
def build_proxies_cmd(panel_dir, embeddings_path, k, dtw_m, dtw_band,
                      gazetteer_path, train_end_label, out_dir):
    """Build the semantic graph, DTW neighborhoods, and geo tags."""
    started = time.time()
    panel = pnl.load_panel(panel_dir)
    split = chronological_split(panel)
    train_end = _week_index(panel, train_end_label, split.train_end)
    canon = [kw.canonical for kw in panel.keywords]
    if embeddings_path == "fallback":
        embeddings = fallback_embeddings(canon)
    else:
        embeddings = load_embeddings(embeddings_path, canon)
    graph = build_semantic_graph(embeddings, k)
    graph.check_invariants()
    neighborhoods = build_dtw_neighborhoods(panel, 0, train_end, dtw_m,
                                            dtw_band)
    gazetteer = _load_gazetteer(gazetteer_path)
    tags = [tag_geography(text, gazetteer) for text in canon]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_embeddings(canon, embeddings.vectors, out / "embeddings.jsonl")
    save_graph(graph, out / "graph.csv")
    save_neighborhoods(neighborhoods, out / "neighborhoods.npz")
    save_geo_tags(tags, out / "geo_tags.csv")
    tagged = sum(1 for t in tags if t.level is not None)
    click.echo(f"proxies: k={k} graph, m={dtw_m} r={dtw_band} neighborhoods "
               f"(train weeks [0, {train_end})), {tagged}/{len(tags)} "
               f"keywords geo-tagged ({embeddings.source} embeddings, "
               f"{embeddings.fallback_count} fallbacks)")
    inputs = [Path(panel_dir)]
    if embeddings_path != "fallback":
        inputs.append(Path(embeddings_path))
    _write_manifest("build-proxies",
                    {"panel": panel_dir, "embeddings": embeddings_path,
                     "k": k, "dtw_m": dtw_m, "dtw_band": dtw_band,
                     "train_end": train_end}, inputs, out, None, started)


@main.command("featurize")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--proxies", "proxies_dir", required=True,
              type=click.Path(file_okay=False),
              help="Proxy artifact directory (build-proxies output).")
@click.option("--families", default="core", show_default=True,
              help="Comma-separated feature families "
                   "(core,geo,sem_cpc,dtw_cpc,calendar,mix,distractor).")
@click.option("--geo-res", default="continent", show_default=True,
              type=click.Choice(["continent", "country", "city"]),
              help="Geo one-hot resolution.")
@click.option("--distractors", default=8, show_default=True,
              help="Distractor column count when that family is enabled.")
@click.option("--seed", default=0, show_default=True,
              help="Seed for distractor noise.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def featurize_cmd(panel_dir, proxies_dir, families, geo_res, distractors,
                  seed, out_dir):
    """Assemble the leakage-free N x T x F feature tensor."""
    started = time.time()
    panel = pnl.load_panel(panel_dir)
    proxies = Path(proxies_dir)
    graph = load_graph(proxies / "graph.csv")
    neighborhoods = load_neighborhoods(proxies / "neighborhoods.npz")
    tags = load_geo_tags(proxies / "geo_tags.csv")
    fams = tuple(tok.strip() for tok in families.split(",") if tok.strip())
    config = FeatureConfig(
        families=fams, geo_resolution=geo_res,
        train_end=neighborhoods.train_end,
        distractor_count=distractors if "distractor" in fams else 0,
        distractor_seed=seed)
    tensor = build_features(panel, graph, neighborhoods, tags, config)
    tensor.check_invariants()
    out = Path(out_dir)
    save_features(tensor, out)
    click.echo(f"features: {tensor.values.shape[0]} x "
               f"{tensor.values.shape[1]} x {tensor.n_features} "
               f"({', '.join(fams)}); hash {tensor.config_hash}")
    _write_manifest("featurize", {"panel": panel_dir, "proxies": proxies_dir,
                                  "families": families, "geo_res": geo_res,
                                  "distractors": distractors},
                    [Path(panel_dir), proxies], out, seed, started)


# ---------------------------------------------------------------------------
# train / forecast
# ---------------------------------------------------------------------------

@main.command("train")
@click.option("--model", required=True,
              type=click.Choice(["snaive", "ridge", "dcrnn"]))
@click.option("--features", "features_dir", default=None,
              type=click.Path(file_okay=False),
              help="Feature tensor directory (ridge/dcrnn).")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False),
              help="Panel directory providing training targets.")
@click.option("--graph", "graph_path", default=None,
              type=click.Path(dir_okay=False),
              help="Semantic graph edge CSV (dcrnn only).")
@click.option("--horizons", default="1,6,12", show_default=True,
              help="Comma-separated forecast horizons in weeks.")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0),
              help="Training seed (dcrnn).")
@click.option("--penalty", default=1.0, show_default=True,
              help="Ridge penalty lambda.")
@click.option("--test-fraction", default=DEFAULT_TEST_FRACTION,
              show_default=True, help="Held-out chronological fraction.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def train_cmd(model, features_dir, panel_dir, graph_path, horizons, seed,
              penalty, test_fraction, out_dir):
    """Fit a forecaster on the chronological training range."""
    started = time.time()
    panel = pnl.load_panel(panel_dir)
    split = chronological_split(panel, test_fraction)
    task = ForecastTask(horizons=_parse_horizons(horizons))
    out = Path(out_dir)
    inputs = [Path(panel_dir)]
    if model == "snaive":
        save_checkpoint("snaive", out, extra={"horizons": list(task.horizons)})
    else:
        if features_dir is None:
            raise ValueError(f"--features is required for model {model}")
        tensor = load_features(features_dir)
        inputs.append(Path(features_dir))
        if model == "ridge":
            fitted = fit_ridge(tensor, panel, task, penalty=penalty,
                               train_end=split.train_end)
            save_checkpoint(fitted, out)
        else:
            if graph_path is None:
                raise ValueError("--graph is required for model dcrnn")
            graph = load_graph(graph_path)
            inputs.append(Path(graph_path))
            cfg = GraphForecasterConfig(seed=seed,
                                        input_window=task.input_window)
            fitted = fit_graph_forecaster(tensor, panel, graph, task, cfg,
                                          train_end=split.train_end)
            save_checkpoint(fitted, out, graph=graph)
    click.echo(f"trained {model} (horizons {horizons}, train weeks "
               f"[0, {split.train_end}))")
    _write_manifest("train", {"model": model, "features": features_dir,
                              "panel": panel_dir, "graph": graph_path,
                              "horizons": horizons, "penalty": penalty,
                              "test_fraction": test_fraction},
                    inputs, out, seed, started)


@main.command("forecast")
@click.option("--model-dir", required=True,
              type=click.Path(file_okay=False),
              help="Checkpoint directory (train output).")
@click.option("--features", "features_dir", default=None,
              type=click.Path(file_okay=False),
              help="Feature tensor directory (ridge/dcrnn).")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--origins", default="test", show_default=True,
              help="'test' for the held-out origins, or comma-separated "
                   "week indices.")
@click.option("--test-fraction", default=DEFAULT_TEST_FRACTION,
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Forecast CSV destination.")
@_stage
def forecast_cmd(model_dir, features_dir, panel_dir, origins, test_fraction,
                 out_path):
    """Predict CPC at the requested origin weeks."""
    started = time.time()
    panel = pnl.load_panel(panel_dir)
    kind, model = load_checkpoint(model_dir)
    manifest = json.loads((Path(model_dir) / "checkpoint_manifest.json"
                           ).read_text())
    horizons = tuple(manifest["horizons"])
    if origins == "test":
        split = chronological_split(panel, test_fraction)
        origin_weeks = sorted(set(np.concatenate(
            [scored_test_origins(split, h) for h in horizons])))
    else:
        origin_weeks = sorted(int(tok) for tok in origins.split(","))
    if kind == "snaive":
        fset = seasonal_naive(panel, origin_weeks, horizons)
    else:
        if features_dir is None:
            raise ValueError(f"--features is required for model {kind}")
        tensor = load_features(features_dir)
        fset = predict_ridge(model, tensor, origin_weeks) if kind == "ridge" \
            else predict_graph(model, tensor, origin_weeks)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_forecasts(fset, out)
    click.echo(f"{kind}: {len(fset)} forecasts at {len(origin_weeks)} origins")
    inputs = [Path(model_dir), Path(panel_dir)]
    if features_dir:
        inputs.append(Path(features_dir))
    _write_manifest("forecast", {"model_dir": model_dir, "origins": origins,
                                 "test_fraction": test_fraction},
                    inputs, out, None, started)


# ---------------------------------------------------------------------------
# evaluate / frontier / ablate
# ---------------------------------------------------------------------------

def _long_format(summary: pd.DataFrame, model_id: str) -> pd.DataFrame:
    rows = []
    for _, row in summary.iterrows():
        for metric in ("smape", "rmse"):
            for stat in ("mean", "std"):
                rows.append({"model": model_id, "horizon": int(row.horizon),
                             "quadrant": row.quadrant, "metric": metric,
                             "stat": stat, "value": row[f"{metric}_{stat}"]})
    return pd.DataFrame(rows)


def _write_report(report, out: Path, prefix: str = "") -> None:
    out.mkdir(parents=True, exist_ok=True)
    report.per_keyword.to_csv(out / f"{prefix}per_keyword.csv", index=False)
    summary = report.summary.copy()
    summary.insert(0, "model", report.model_id)
    summary.to_csv(out / f"{prefix}summary.csv", index=False)
    _long_format(report.summary, report.model_id).to_csv(
        out / f"{prefix}report_long.csv", index=False)


@main.command("evaluate")
@click.option("--forecasts", "forecasts_path", required=True,
              type=click.Path(dir_okay=False),
              help="Forecast CSV (forecast output).")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--test-fraction", default=DEFAULT_TEST_FRACTION,
              show_default=True)
@click.option("--segment/--no-segment", default=True, show_default=True,
              help="Include frontier-quadrant sub-aggregates.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def evaluate_cmd(forecasts_path, panel_dir, test_fraction, segment, out_dir):
    """Score forecasts: per-keyword and aggregate sMAPE/RMSE."""
    started = time.time()
    panel = pnl.load_panel(panel_dir)
    fset = load_forecasts(forecasts_path)
    split = chronological_split(panel, test_fraction)
    segmentation = None
    if segment:
        stats = pnl.compute_stats(panel, 0, split.train_end)
        segmentation = frontier_segment(stats)
    report = evaluate(fset, panel, split, segmentation)
    out = Path(out_dir)
    _write_report(report, out)
    overall = report.summary[report.summary.quadrant == "all"]
    click.echo(overall.to_string(index=False))
    _write_manifest("evaluate", {"forecasts": forecasts_path,
                                 "panel": panel_dir,
                                 "test_fraction": test_fraction},
                    [Path(forecasts_path), Path(panel_dir)], out, None,
                    started)


@main.command("frontier")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--test-fraction", default=DEFAULT_TEST_FRACTION,
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Quadrant CSV destination.")
@_stage
def frontier_cmd(panel_dir, test_fraction, out_path):
    """Segment keywords into value/instability quadrants."""
    started = time.time()
    panel = pnl.load_panel(panel_dir)
    split = chronological_split(panel, test_fraction)
    stats = pnl.compute_stats(panel, 0, split.train_end)
    seg = frontier_segment(stats)
    rows = [{"keyword_id": k.id, "keyword": k.canonical,
             "mean_cpc": stats.mean_cpc[k.id], "cv": stats.cv[k.id],
             "quadrant": seg.quadrant[k.id] or ""}
            for k in panel.keywords]
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(out, index=False)
    click.echo(f"quadrants {seg.counts()} (median CPC {seg.median_cpc:.3f}, "
               f"median CV {seg.median_cv:.3f}, {seg.excluded} excluded)")
    _write_manifest("frontier", {"panel": panel_dir,
                                 "test_fraction": test_fraction},
                    [Path(panel_dir)], out, None, started)


@main.command("ablate")
@click.option("--grid", "grid_path", required=True,
              type=click.Path(dir_okay=False),
              help="Flat key-value file: one `name = families` line per "
                   "config, families comma-separated.")
@click.option("--panel", "panel_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--proxies", "proxies_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--distractors", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--test-fraction", default=DEFAULT_TEST_FRACTION,
              show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def ablate_cmd(grid_path, panel_dir, proxies_dir, distractors, seed,
               test_fraction, out_dir):
    """Run a ridge ablation grid over feature configurations."""
    started = time.time()
    grid_raw = _read_config_file(grid_path)
    if not grid_raw:
        raise ValueError("empty ablation grid")
    panel = pnl.load_panel(panel_dir)
    proxies = Path(proxies_dir)
    graph = load_graph(proxies / "graph.csv")
    neighborhoods = load_neighborhoods(proxies / "neighborhoods.npz")
    tags = load_geo_tags(proxies / "geo_tags.csv")
    split = chronological_split(panel, test_fraction)
    stats = pnl.compute_stats(panel, 0, split.train_end)
    segmentation = frontier_segment(stats)
    task = ForecastTask()
    origin_weeks = sorted(set(np.concatenate(
        [scored_test_origins(split, h) for h in task.horizons])))

    configs = {}
    for name, families in grid_raw.items():
        fams = tuple(tok.strip() for tok in families.split(","))
        configs[name] = FeatureConfig(
            families=fams, train_end=split.train_end,
            distractor_count=distractors if "distractor" in fams else 0,
            distractor_seed=seed)

    def run_one(name: str, config: FeatureConfig):
        tensor = build_features(panel, graph, neighborhoods, tags, config)
        fitted = fit_ridge(tensor, panel, task, train_end=split.train_end)
        fset = predict_ridge(fitted, tensor, origin_weeks)
        return evaluate(fset, panel, split, segmentation)

    table = run_ablation(configs, run_one)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "ablation.csv", index=False)
    shown = table[(table.get("quadrant") == "all") | (table.status != "ok")]
    click.echo(shown.to_string(index=False))
    _write_manifest("ablate", {"grid": grid_path, "panel": panel_dir,
                               "proxies": proxies_dir,
                               "distractors": distractors},
                    [Path(grid_path), Path(panel_dir), proxies], out, seed,
                    started)


# ---------------------------------------------------------------------------
# synth / demo
# ---------------------------------------------------------------------------

@main.command("synth")
@click.option("--config", "config_file", default=None,
              type=click.Path(dir_okay=False),
              help="Flat key-value generator settings.")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0),
              help="Master 64-bit seed.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def synth_cmd(config_file, seed, out_dir):
    """Generate a synthetic market in the real pipeline's file formats."""
    started = time.time()
    cfg = _synth_config(config_file, seed)
    panel, embeddings, tags, truth = syn.generate(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.jsonl", "w") as fh:
        for ev in syn.panel_to_events(panel, seed=seed):
            fh.write(ing.serialize_event(ev) + "\n")
    pnl.save_panel(panel, out / "panel")
    canon = [kw.canonical for kw in panel.keywords]
    save_embeddings(canon, embeddings.vectors, out / "embeddings.jsonl")
    save_geo_tags(tags, out / "geo_tags.csv")
    syn.save_truth(truth, out / "truth.jsonl")
    click.echo(f"synth: {panel.n_keywords} keywords x {panel.n_weeks} weeks, "
               f"{cfg.n_clusters} clusters, seed {seed}")
    _write_manifest("synth", dataclasses.asdict(cfg), [], out, seed, started)


_DEMO_FULL_FAMILIES = ("core", "geo", "sem_cpc", "dtw_cpc")


@main.command("demo")
@click.option("--seed", default=7, show_default=True, type=click.IntRange(0),
              help="Master seed for the whole pipeline.")
@click.option("--config", "config_file", default=None,
              type=click.Path(dir_okay=False),
              help="Flat key-value generator settings.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_stage
def demo_cmd(seed, config_file, out_dir):
    """End-to-end run on synthetic data: generate, build proxies,
    featurize, train all model families, evaluate, segment."""
    started = time.time()
    cfg = _synth_config(config_file, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    panel, embeddings, tags, _ = syn.generate(cfg)
    panel, _imputed = pnl.impute_gaps(panel)
    pnl.save_panel(panel, out / "panel")
    split = chronological_split(panel)
    task = ForecastTask()
    origin_weeks = sorted(set(np.concatenate(
        [scored_test_origins(split, h) for h in task.horizons])))

    graph = build_semantic_graph(embeddings, 10)
    neighborhoods = build_dtw_neighborhoods(panel, 0, split.train_end)
    gazetteer = load_bundled_gazetteer()
    geo_tags = [tag_geography(kw.canonical, gazetteer)
                for kw in panel.keywords]
    save_graph(graph, out / "graph.csv")
    save_neighborhoods(neighborhoods, out / "neighborhoods.npz")
    save_geo_tags(geo_tags, out / "geo_tags.csv")

    core_cfg = FeatureConfig(families=("core",), train_end=split.train_end)
    full_cfg = FeatureConfig(families=_DEMO_FULL_FAMILIES,
                             train_end=split.train_end)
    core_feats = build_features(panel, graph, neighborhoods, geo_tags,
                                core_cfg)
    full_feats = build_features(panel, graph, neighborhoods, geo_tags,
                                full_cfg)

    stats = pnl.compute_stats(panel, 0, split.train_end)
    segmentation = frontier_segment(stats)

    forecasts = {
        "snaive": seasonal_naive(panel, origin_weeks, task.horizons),
        "ridge_core": predict_ridge(
            fit_ridge(core_feats, panel, task, train_end=split.train_end),
            core_feats, origin_weeks),
        "ridge_full": predict_ridge(
            fit_ridge(full_feats, panel, task, train_end=split.train_end),
            full_feats, origin_weeks),
        "dcrnn": predict_graph(
            fit_graph_forecaster(full_feats, panel, graph, task,
                                 GraphForecasterConfig(seed=seed),
                                 train_end=split.train_end),
            full_feats, origin_weeks),
    }

    summaries = []
    for name, fset in forecasts.items():
        save_forecasts(fset, out / f"forecasts_{name}.csv")
        report = evaluate(fset, panel, split, segmentation)
        _write_report(report, out / "reports", prefix=f"{name}_")
        block = report.summary.copy()
        block.insert(0, "model", name)
        summaries.append(block)
    summary = pd.concat(summaries, ignore_index=True)
    summary.to_csv(out / "summary.csv", index=False)

    frontier_rows = [{"keyword_id": k.id, "keyword": k.canonical,
                      "mean_cpc": stats.mean_cpc[k.id], "cv": stats.cv[k.id],
                      "quadrant": segmentation.quadrant[k.id] or ""}
                     for k in panel.keywords]
    pd.DataFrame(frontier_rows).to_csv(out / "frontier.csv", index=False)

    shown = summary[summary.quadrant == "all"]
    click.echo(shown.to_string(index=False,
                               float_format=lambda v: f"{v:.2f}"))
    click.echo(f"demo complete in {time.time() - started:.0f}s "
               f"(artifacts in {out})")
    _write_manifest("demo", dataclasses.asdict(cfg), [], out, seed, started)


if __name__ == "__main__":
    main()
