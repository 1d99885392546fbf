"""The algorithm x feature set x input variant benchmark matrix.

Run directory layout::

    config.yaml            resolved configuration
    split.json             train / holdout ids
    features/              one feature table per (dataset, feature set)
    cells/<cell id>/       bundle.lbm, cv.json, metrics.json, fairness.json, status.json
    timing.csv, timing.json
    summary.json           per-cell status
    report.md

Each cell is written into a private temporary directory and moved into
place when complete.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from laryngobench.bundle import ModelBundle, atomic_write_text, load_bundle, save_bundle
from laryngobench.config import DatasetConfig, RunConfig
from laryngobench.dataset import LabeledDataset, LabelMap, load_manifest, stratified_split
from laryngobench.evaluation import metric_report
from laryngobench.fairness import fairness_battery
from laryngobench.features.table import FeatureTable, extract_table, write_feature_table
from laryngobench.pipeline import VARIANTS, fit_audio_selector, fit_final, variant_block
from laryngobench.selection import grid_search
from laryngobench.timing import time_model, write_timing_csv

log = logging.getLogger(__name__)

BUNDLE_NAME = "bundle.lbm"
DEVIATION_NOTES = (
    "MLP solver lbfgs is not part of the default grid",
    "logistic-regression solver names map onto two optimizers (newton, proximal)",
    "equivalent grid cells are collapsed onto the first-enumerated cell",
)


def cell_id(feature_set: str, variant: str, algorithm: str) -> str:
    return f"{feature_set}__{variant}__{algorithm}"


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


@dataclass
class EvalSet:
    name: str
    dataset: LabeledDataset
    config: DatasetConfig


@dataclass
class Context:
    config: RunConfig
    train: LabeledDataset
    eval_sets: list[EvalSet]
    tables: dict  # (dataset name, feature set) -> FeatureTable


def vectors_path_for(ds: DatasetConfig, feature_set: str):
    if feature_set == "embedding":
        return ds.embeddings
    if feature_set == "acoustic":
        return ds.acoustic_vectors
    return None


def load_inputs(config: RunConfig):
    label_map = LabelMap.from_file(config.label_map)
    full = load_manifest(config.train.manifest, label_map, config.train.schema)
    if config.holdout:
        train = full
        holdout = load_manifest(config.holdout.manifest, label_map, config.holdout.schema)
        holdout_cfg = config.holdout
    else:
        train, holdout = stratified_split(full, config.test_fraction, config.seed)
        holdout_cfg = config.train
    evals = [EvalSet("holdout", holdout, holdout_cfg)]
    for ext in config.external:
        evals.append(EvalSet(ext.name, load_manifest(ext.manifest, label_map, ext.schema), ext))
    return train, evals


def extract_all(config: RunConfig, train: LabeledDataset, evals: list[EvalSet], out: Path) -> dict:
    tables = {}
    (out / "features").mkdir(parents=True, exist_ok=True)
    for fs in config.feature_sets:
        cfg = config.train
        t = extract_table(train.records, fs, config.audio_root_for(cfg), vectors_path_for(cfg, fs), jobs=config.jobs)
        tables[("train", fs)] = t
        for ev in evals:
            tables[(ev.name, fs)] = extract_table(
                ev.dataset.records, fs, config.audio_root_for(ev.config), vectors_path_for(ev.config, fs),
                target_frames=t.target_frames, jobs=config.jobs)
        for (name, f), table in tables.items():
            if f == fs:
                write_feature_table(out / "features" / f"{name}.{fs}.csv", table)
                for rid, err in table.errors.items():
                    log.warning("%s/%s: feature extraction failed for %s: %s", name, fs, rid, err)
    return tables


def _usable(ds: LabeledDataset, table: FeatureTable):
    keep = [i for i, r in enumerate(ds.records) if r.id not in table.errors]
    return ds.subset(keep), table.X[keep], sorted(table.errors)


def evaluate_bundle(bundle: ModelBundle, ds: LabeledDataset, X1: np.ndarray, n_resamples: int, seed: int):
    scores = bundle.score(X1, ds.records)
    pred = (scores >= 0).astype(np.int8)
    y = ds.labels
    report = metric_report(y, pred, scores, n_resamples=n_resamples, seed=seed)
    fair = fairness_battery([r.sex for r in ds.records], [r.age for r in ds.records], y, pred)
    return report, fair, scores, pred


def run_cell(ctx: Context, feature_set: str, variant: str, algorithm: str, out: Path) -> dict:
    cfg = ctx.config
    cid = cell_id(feature_set, variant, algorithm)
    final_dir = out / "cells" / cid
    tmp_dir = out / "cells" / f".tmp-{cid}-{os.getpid()}"
    if tmp_dir.exists():
        shutil.rmtree(tmp_dir)
    tmp_dir.mkdir(parents=True)
    status: dict = {"cell": cid, "feature_set": feature_set, "variant": variant, "algorithm": algorithm}
    try:
        needs_symptoms = VARIANTS[variant][1]
        symptom_cols = ctx.train.symptom_columns
        if needs_symptoms and not symptom_cols:
            status.update(status="skipped", reason="training manifest declares no symptom columns")
            return _finish_cell(tmp_dir, final_dir, status)
        train, X1, dropped = _usable(ctx.train, ctx.tables[("train", feature_set)])
        y = train.labels
        X2, demo_names = variant_block(train.records, variant, symptom_cols)
        selector = fit_audio_selector(X1, y, cfg.pipeline) if cfg.pipeline.select_scope == "global" else None
        cv = grid_search(X1, X2, y, algorithm, cfg.grid, cfg.pipeline, seed=cfg.seed, k=cfg.folds)
        hp = cv.winner.hyperparams
        state, model = fit_final(X1, X2, y, algorithm, hp, cfg.pipeline, cfg.seed, selector)
        bundle = ModelBundle(
            feature_set=feature_set, variant=variant, algorithm=algorithm, hyperparams=hp, pipeline=state,
            model=model, target_frames=ctx.tables[("train", feature_set)].target_frames,
            symptom_columns=tuple(symptom_cols) if needs_symptoms else (),
            seeds={"split": cfg.seed, "cv": cfg.seed, "model": cfg.seed, "bootstrap": cfg.seed},
            notes=DEVIATION_NOTES + (f"feature selection scope: {cfg.pipeline.select_scope}",),
        )
        save_bundle(bundle, tmp_dir / BUNDLE_NAME)
        atomic_write_text(tmp_dir / "cv.json", dump_json({"cell": cid, **cv.to_dict()}))
        metrics, fairness = {}, {}
        for ev in ctx.eval_sets:
            if needs_symptoms and not set(symptom_cols) <= set(ev.dataset.symptom_columns):
                reason = f"{ev.name} lacks the symptom columns this variant needs"
                metrics[ev.name] = {"skipped": True, "reason": reason}
                fairness[ev.name] = {"skipped": True, "reason": reason}
                continue
            eds, EX1, edrop = _usable(ev.dataset, ctx.tables[(ev.name, feature_set)])
            rep, fair, _, _ = evaluate_bundle(bundle, eds, EX1, cfg.bootstrap_resamples, cfg.seed)
            rep.update(test_set=ev.name, excluded_ids=edrop)
            metrics[ev.name], fairness[ev.name] = rep, fair
        atomic_write_text(tmp_dir / "metrics.json", dump_json({"cell": cid, "test_sets": metrics}))
        atomic_write_text(tmp_dir / "fairness.json", dump_json({"cell": cid, "test_sets": fairness}))
        status.update(status="ok", winner=hp, cv_mean=cv.winner.mean, n_train=int(y.size),
                      demographic_columns=demo_names, excluded_train_ids=dropped,
                      selected_audio_features=int(state.selector.selected_indices.size))
    except Exception as exc:  # a failing cell must not stop the matrix
        log.error("cell %s failed: %s", cid, exc)
        log.debug("cell %s traceback", cid, exc_info=True)
        status.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return _finish_cell(tmp_dir, final_dir, status)


def _finish_cell(tmp_dir: Path, final_dir: Path, status: dict) -> dict:
    atomic_write_text(tmp_dir / "status.json", dump_json(status))
    if final_dir.exists():
        shutil.rmtree(final_dir)
    os.replace(tmp_dir, final_dir)
    return status


_CTX: dict = {}


def _init_worker(ctx, out):
    _CTX.update(ctx=ctx, out=out)


def _run_cell_worker(cell):
    return run_cell(_CTX["ctx"], *cell, _CTX["out"])


def matrix_cells(config: RunConfig) -> list[tuple[str, str, str]]:
    return [(fs, v, a) for fs in config.feature_sets for v in config.variants for a in config.algorithms]


def run_timing(config: RunConfig, ctx: Context, statuses: list[dict], out: Path) -> list:
    holdout = ctx.eval_sets[0]
    reports = []
    for st in statuses:
        if st["status"] != "ok":
            continue
        fs = st["feature_set"]
        bundle = load_bundle(out / "cells" / st["cell"] / BUNDLE_NAME)
        table = ctx.tables[(holdout.name, fs)]
        records = [r for r in holdout.dataset.records if r.id not in table.errors][: config.timing_files]
        reports.append(time_model(bundle, records, st["cell"], config.timing_repeats,
                                  config.audio_root_for(holdout.config), vectors_path_for(holdout.config, fs)))
    write_timing_csv(out / "timing.csv", reports)
    atomic_write_text(out / "timing.json", dump_json([r.to_dict() for r in reports]))
    return reports


def _config_snapshot(config: RunConfig) -> dict:
    d = asdict(config)
    d["grid"] = config.grid.options
    return json.loads(json.dumps(d))


def run_benchmark(config: RunConfig, timing: bool = True) -> tuple[Path, list[dict]]:
    """Run every selected cell; returns the run directory and per-cell statuses."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    atomic_write_text(out / "config.yaml", yaml.safe_dump(_config_snapshot(config), sort_keys=True))
    train, evals = load_inputs(config)
    atomic_write_text(out / "split.json", dump_json(
        {"seed": config.seed, "train": train.ids, **{ev.name: ev.dataset.ids for ev in evals}}))
    tables = extract_all(config, train, evals, out)
    ctx = Context(config, train, evals, tables)
    cells = matrix_cells(config)
    if config.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(config.jobs, initializer=_init_worker, initargs=(ctx, out)) as ex:
            statuses = list(ex.map(_run_cell_worker, cells))
    else:
        statuses = [run_cell(ctx, *c, out) for c in cells]
    atomic_write_text(out / "summary.json", dump_json({
        "cells": statuses,
        "counts": {s: sum(st["status"] == s for st in statuses) for s in ("ok", "skipped", "failed")},
    }))
    if timing:
        run_timing(config, ctx, statuses, out)
    atomic_write_text(out / "run_info.json", dump_json({"elapsed_seconds": time.perf_counter() - started}))
    from laryngobench.report import render_report

    atomic_write_text(out / "report.md", render_report(out))
    return out, statuses
