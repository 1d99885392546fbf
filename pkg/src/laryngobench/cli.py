"""Command-line driver.

Exit codes: 0 success, 1 partial failure (some benchmark cells failed),
2 configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from laryngobench.bundle import BundleError, ModelBundle, load_bundle, save_bundle
from laryngobench.config import ConfigError, RunConfig, load_config
from laryngobench.dataset import (
    LabelMap,
    RowError,
    SchemaError,
    StratificationError,
    compare_datasets,
    load_manifest,
    resolve_durations,
    stratified_split,
    summarize,
    write_manifest,
)
from laryngobench.features.embeddings import EmbeddingFormatError
from laryngobench.features.table import FEATURE_SETS, extract_table, write_feature_table
from laryngobench.pipeline import VARIANTS, fit_audio_selector, fit_final, variant_block
from laryngobench.selection import DEFAULT_SEED, ParamGrid, grid_search

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
INPUT_ERRORS = (ConfigError, SchemaError, RowError, StratificationError, BundleError, EmbeddingFormatError,
                FileNotFoundError)

log = logging.getLogger("laryngobench")


def _emit(obj, out: str | None, name: str) -> None:
    from laryngobench.benchmark import dump_json

    text = dump_json(obj)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text, encoding="utf-8")
        print(Path(out) / name)
    else:
        sys.stdout.write(text)


def _label_map(args) -> LabelMap:
    if not args.label_map:
        return LabelMap()
    return LabelMap.from_file(args.label_map)


def _seed(args) -> int:
    return DEFAULT_SEED if args.seed is None else args.seed


def _run_config(args) -> RunConfig:
    """Config for single-cell commands: grid and pipeline blocks from --config if given."""
    cfg = None
    if args.config:
        import yaml

        data = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        data = {k: data[k] for k in ("grid", "grid_file", "pipeline", "folds", "bootstrap") if k in data}
        data.update(train={"manifest": args.manifest}, label_map=args.label_map or args.manifest)
        from laryngobench.config import config_from_dict

        cfg = config_from_dict(data, Path(args.config).resolve().parent)
    return cfg


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    from laryngobench.synthetic import generate_benchmark_data

    paths = generate_benchmark_data(args.out or "synthetic", n=args.n, n_external=args.n_external, seed=_seed(args),
                                    malignant_fraction=args.malignant_fraction)
    print(json.dumps(paths, indent=1))
    return EXIT_OK


def cmd_split(args) -> int:
    ds = load_manifest(args.manifest, _label_map(args))
    train, test = stratified_split(ds, args.test_fraction, _seed(args))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.manifest).stem
    write_manifest(out / f"{stem}.train.csv", train)
    write_manifest(out / f"{stem}.holdout.csv", test)
    print(json.dumps({"train": summarize(train), "holdout": summarize(test)}, indent=1))
    return EXIT_OK


def cmd_extract(args) -> int:
    ds = load_manifest(args.manifest, _label_map(args))
    table = extract_table(ds.records, args.feature_set, args.audio_root, args.vectors,
                          target_frames=args.target_frames, jobs=args.jobs)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{Path(args.manifest).stem}.{args.feature_set}.csv"
    write_feature_table(path, table)
    for rid, err in table.errors.items():
        log.warning("%s: %s", rid, err)
    print(path)
    return EXIT_PARTIAL if table.errors else EXIT_OK


def _features_for(ds, feature_set, args, target_frames=None):
    table = extract_table(ds.records, feature_set, args.audio_root, args.vectors, target_frames=target_frames,
                          jobs=args.jobs)
    keep = [i for i, r in enumerate(ds.records) if r.id not in table.errors]
    for rid, err in table.errors.items():
        log.warning("skipping %s: %s", rid, err)
    return ds.subset(keep), table.X[keep], table


def cmd_train(args) -> int:
    cfg = _run_config(args)
    grid = cfg.grid if cfg else ParamGrid()
    from laryngobench.pipeline import PipelineConfig

    pipe = cfg.pipeline if cfg else PipelineConfig(select_scope=args.select_scope or "fold")
    if args.select_scope and cfg:
        from dataclasses import replace

        pipe = replace(pipe, select_scope=args.select_scope)
    folds = cfg.folds if cfg else 5
    seed = _seed(args)
    ds = load_manifest(args.manifest, _label_map(args))
    ds, X1, table = _features_for(ds, args.feature_set, args)
    y = ds.labels
    X2, _ = variant_block(ds.records, args.variant, ds.symptom_columns)
    cv = grid_search(X1, X2, y, args.algorithm, grid, pipe, seed=seed, k=folds, jobs=args.jobs)
    selector = fit_audio_selector(X1, y, pipe) if pipe.select_scope == "global" else None
    hp = cv.winner.hyperparams
    state, model = fit_final(X1, X2, y, args.algorithm, hp, pipe, seed, selector)
    bundle = ModelBundle(args.feature_set, args.variant, args.algorithm, hp, state, model, table.target_frames,
                         tuple(ds.symptom_columns) if VARIANTS[args.variant][1] else (),
                         {"cv": seed, "model": seed}, (f"feature selection scope: {pipe.select_scope}",))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, out / "bundle.lbm")
    _emit(cv.to_dict(), str(out), "cv.json")
    print(out / "bundle.lbm")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from laryngobench.benchmark import evaluate_bundle

    bundle = load_bundle(args.bundle)
    ds = load_manifest(args.manifest, _label_map(args))
    ds, X1, _ = _features_for(ds, bundle.feature_set, args, bundle.target_frames)
    report, fair, _, _ = evaluate_bundle(bundle, ds, X1, args.n_resamples, _seed(args))
    _emit({"metrics": report, "fairness": fair}, args.out, "evaluation.json")
    return EXIT_OK


def cmd_fairness(args) -> int:
    from laryngobench.fairness import fairness_battery

    bundle = load_bundle(args.bundle)
    ds = load_manifest(args.manifest, _label_map(args))
    ds, X1, _ = _features_for(ds, bundle.feature_set, args, bundle.target_frames)
    pred = bundle.predict(X1, ds.records)
    report = fairness_battery([r.sex for r in ds.records], [r.age for r in ds.records], ds.labels, pred,
                              supplementary=args.supplementary)
    _emit(report, args.out, "fairness.json")
    return EXIT_OK


def cmd_timing(args) -> int:
    from laryngobench.timing import time_model, write_timing_csv

    bundle = load_bundle(args.bundle)
    ds = load_manifest(args.manifest, _label_map(args))
    records = list(ds.records)[: args.files] if args.files else list(ds.records)
    report = time_model(bundle, records, Path(args.bundle).stem, args.repeats, args.audio_root, args.vectors)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_timing_csv(Path(args.out) / "timing.csv", [report])
    _emit(report.to_dict(), args.out, "timing.json")
    return EXIT_PARTIAL if report.errors else EXIT_OK


def cmd_compare(args) -> int:
    lm = _label_map(args)
    a = resolve_durations(load_manifest(args.manifest_a, lm), args.audio_root)
    b = resolve_durations(load_manifest(args.manifest_b, lm), args.audio_root)
    _emit(compare_datasets(a, b), args.out, "comparison.json")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from laryngobench.benchmark import run_benchmark

    overrides = {"seed": args.seed, "jobs": args.jobs,
                 "out": str(Path(args.out).resolve()) if args.out else None,
                 "audio_root": str(Path(args.audio_root).resolve()) if args.audio_root else None}
    if not args.config:
        raise ConfigError("benchmark needs --config")
    config = load_config(args.config, overrides)
    out, statuses = run_benchmark(config, timing=not args.no_timing)
    failed = [s["cell"] for s in statuses if s["status"] == "failed"]
    print(f"{out}: {len(statuses)} cells, {len(failed)} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(args) -> int:
    from laryngobench.report import render_report

    text = render_report(args.run_dir)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--audio-root", help="directory that manifest audio paths are relative to")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", help="output directory (or file for 'report')")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="laryngobench", description="Voice-pathology classification benchmark.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, manifest=True):
        sp = sub.add_parser(name, help=help_, parents=[common])
        if manifest:
            sp.add_argument("manifest", help="patient manifest (CSV)")
            sp.add_argument("--label-map", help="file listing malignant pathologies under [malignant]")
        sp.set_defaults(func=func)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic sustained-vowel cohort", manifest=False)
    sp.add_argument("--n", type=int, default=600)
    sp.add_argument("--n-external", type=int, default=0)
    sp.add_argument("--malignant-fraction", type=float, default=0.05)

    sp = add("split", cmd_split, "stratified train/holdout split")
    sp.add_argument("--test-fraction", type=float, default=0.33)

    sp = add("extract", cmd_extract, "write a feature table")
    sp.add_argument("--feature-set", choices=FEATURE_SETS, required=True)
    sp.add_argument("--vectors", help="precomputed vectors in the embedding interchange format")
    sp.add_argument("--target-frames", type=int, help="MFCC frame count (default: mean of this manifest)")

    sp = add("train", cmd_train, "grid-search and fit one model")
    sp.add_argument("--feature-set", choices=FEATURE_SETS, required=True)
    sp.add_argument("--variant", choices=tuple(VARIANTS), default="voice")
    sp.add_argument("--algorithm", choices=("svm", "mlp", "logreg"), required=True)
    sp.add_argument("--vectors")
    sp.add_argument("--select-scope", choices=("fold", "global"), default=None)

    for name, func, help_ in (("evaluate", cmd_evaluate, "metrics with bootstrap intervals for a bundle"),
                              ("fairness", cmd_fairness, "sex and age tests on a bundle's predictions"),
                              ("timing", cmd_timing, "per-file prediction latency")):
        sp = add(name, func, help_)
        sp.add_argument("--bundle", required=True)
        sp.add_argument("--vectors")
        if name == "evaluate":
            sp.add_argument("--n-resamples", type=int, default=1000)
        if name == "fairness":
            sp.add_argument("--supplementary", action="store_true", help="emit per-patient rows for plotting")
        if name == "timing":
            sp.add_argument("--repeats", type=int, default=5)
            sp.add_argument("--files", type=int, default=0, help="time only the first N files")

    sp = add("compare-datasets", cmd_compare, "age, sex and duration tests between two datasets", manifest=False)
    sp.add_argument("manifest_a")
    sp.add_argument("manifest_b")
    sp.add_argument("--label-map")

    sp = add("benchmark", cmd_benchmark, "run the full model matrix from --config", manifest=False)
    sp.add_argument("--no-timing", action="store_true")

    sp = add("report", cmd_report, "render a run directory as markdown", manifest=False)
    sp.add_argument("run_dir")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
