"""Stratified k-fold grid search over the hyperparameter table.

Cells are enumerated as the Cartesian product of each algorithm's rows in
table order (first row varies slowest).  Cells that fit the same model are
collapsed onto the first-enumerated one, for example ``degree`` for a
non-polynomial kernel or ``l1_ratio`` for a non-elasticnet penalty.  Because
the first cell of each equivalence class is kept, the tie-break (first
enumerated wins) is the same as on the uncollapsed grid.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from laryngobench.classifiers import ALGORITHMS, ModelError, fit, predict
from laryngobench.classifiers.logreg import resolve_optimizer
from laryngobench.evaluation import lenient_balanced_accuracy
from laryngobench.pipeline import PipelineConfig, balance_training, fit_audio_selector, fit_pipeline

log = logging.getLogger(__name__)

DEFAULT_FOLDS = 5
DEFAULT_SEED = 42

# MLP "lbfgs" is left out of the default grid; see the README.
DEFAULT_GRID: dict[str, dict[str, list]] = {
    "svm": {
        "C": [0.1, 1, 10, 100, 1000],
        "gamma": ["scale", "auto", 1e-4, 1e-3, 0.01, 0.1, 1],
        "degree": [2, 3, 4],
        "kernel": ["linear", "polynomial", "rbf", "sigmoid"],
    },
    "mlp": {
        "hidden_layer_sizes": [[50], [100], [100, 50], [100, 100], [50, 50, 50]],
        "activation": ["relu", "tanh"],
        "solver": ["adam", "sgd"],
        "learning_rate": ["constant", "invscaling", "adaptive"],
    },
    "logreg": {
        "penalty": ["l1", "l2", "elasticnet", "none"],
        "C": [0.01, 0.1, 1, 10, 100],
        "solver": ["newton-cg", "lbfgs", "liblinear", "saga"],
        "max_iterations": [100, 200, 300, 500],
        "l1_ratio": [0, 0.25, 0.5, 0.75, 1],
    },
}


class GridError(ValueError):
    pass


def canonical_key(algorithm: str, hp: dict) -> tuple:
    """Key identifying the model a cell actually fits."""
    hp = canonicalize(algorithm, hp)
    if algorithm == "logreg":
        hp = {**hp, "solver": resolve_optimizer(hp["solver"], hp["penalty"])}
    return tuple((k, tuple(v) if isinstance(v, list) else v) for k, v in sorted(hp.items()))


def canonicalize(algorithm: str, hp: dict) -> dict:
    """Blank out options that the chosen configuration ignores."""
    hp = dict(hp)
    if algorithm == "svm":
        if hp.get("kernel") not in ("polynomial", "poly"):
            hp["degree"] = None
        if hp.get("kernel") == "linear":
            hp["gamma"] = None
    elif algorithm == "mlp":
        if hp.get("solver") == "adam":
            hp["learning_rate"] = None
    elif algorithm == "logreg":
        if hp.get("penalty") in ("none", None):
            hp["C"] = None
        if hp.get("penalty") != "elasticnet":
            hp["l1_ratio"] = None
    return hp


@dataclass(frozen=True)
class ParamGrid:
    options: dict[str, dict[str, list]] = field(default_factory=lambda: {a: dict(g) for a, g in DEFAULT_GRID.items()})

    def __post_init__(self):
        for alg, rows in self.options.items():
            if alg not in ALGORITHMS:
                raise GridError(f"unknown algorithm {alg!r} in grid")
            for key, values in rows.items():
                if not isinstance(values, list) or not values:
                    raise GridError(f"grid row {alg}.{key} must be a non-empty list")

    def raw_cells(self, algorithm: str) -> list[dict]:
        rows = self.options[algorithm]
        keys = list(rows)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(rows[k] for k in keys))]

    def cells(self, algorithm: str) -> list[dict]:
        """Distinct cells in enumeration order (first of each equivalence class)."""
        seen, out = set(), []
        for hp in self.raw_cells(algorithm):
            key = canonical_key(algorithm, hp)
            if key not in seen:
                seen.add(key)
                out.append(canonicalize(algorithm, hp))
        return out

    @classmethod
    def from_overrides(cls, overrides: dict | None) -> "ParamGrid":
        options = {a: dict(g) for a, g in DEFAULT_GRID.items()}
        for alg, rows in (overrides or {}).items():
            if alg not in options:
                raise GridError(f"unknown algorithm {alg!r} in grid override")
            for key, values in (rows or {}).items():
                if key not in options[alg]:
                    raise GridError(f"unknown hyperparameter {alg}.{key} in grid override")
                options[alg][key] = list(values) if isinstance(values, (list, tuple)) else [values]
        return cls(options)

    @classmethod
    def from_file(cls, path) -> "ParamGrid":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise GridError(f"{path}: grid override must be a mapping")
        return cls.from_overrides(data.get("grid", data))


def stratified_kfold(labels, k: int = DEFAULT_FOLDS, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Fold index per sample.

    Each class is shuffled and dealt round-robin; the dealing position
    carries over from one class to the next so fold sizes stay even.
    """
    y = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < k:
            raise ValueError(f"class {c} has {members.size} members, fewer than k={k}")
        members = rng.permutation(members)
        folds[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return folds


@dataclass
class CellResult:
    hyperparams: dict
    fold_scores: list[float]
    mean: float
    degenerate_folds: list[int]
    error: str | None = None

    def to_dict(self) -> dict:
        return {"hyperparams": self.hyperparams, "fold_scores": self.fold_scores, "mean": self.mean,
                "degenerate_folds": self.degenerate_folds, "error": self.error}


@dataclass
class CvResult:
    algorithm: str
    cells: list[CellResult]
    winner_index: int
    seed: int
    k: int
    select_scope: str

    @property
    def winner(self) -> CellResult:
        return self.cells[self.winner_index]

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "seed": self.seed, "k": self.k, "select_scope": self.select_scope,
                "winner_index": self.winner_index, "cells": [c.to_dict() for c in self.cells]}


@dataclass(frozen=True)
class FoldData:
    X_train: np.ndarray
    y_train: np.ndarray
    class_weights: dict | None
    X_val: np.ndarray
    y_val: np.ndarray


def fold_states(X1, X2, y, folds: np.ndarray, config: PipelineConfig):
    """Preprocessing state of every fold, fitted on that fold's training rows."""
    y = np.asarray(y)
    selector = fit_audio_selector(X1, y, config) if config.select_scope == "global" else None
    states = []
    for f in range(int(folds.max()) + 1):
        tr = folds != f
        states.append(fit_pipeline(X1[tr], None if X2 is None else X2[tr], y[tr], config, selector))
    return states


def prepare_folds(X1, X2, y, algorithm: str, folds: np.ndarray, config: PipelineConfig, seed: int) -> list[FoldData]:
    y = np.asarray(y)
    out = []
    for f, state in enumerate(fold_states(X1, X2, y, folds, config)):
        tr, va = folds != f, folds == f
        Xt = state.transform(X1[tr], None if X2 is None else X2[tr])
        Xv = state.transform(X1[va], None if X2 is None else X2[va])
        Xb, yb, cw = balance_training(Xt, y[tr], algorithm, config, seed)
        out.append(FoldData(Xb, yb, cw, Xv, y[va]))
    return out


def evaluate_cell(algorithm: str, hp: dict, folds: list[FoldData], seed: int) -> CellResult:
    scores, degenerate = [], []
    for f, fd in enumerate(folds):
        try:
            model = fit(algorithm, fd.X_train, fd.y_train, hp, fd.class_weights, seed=seed)
        except ModelError as exc:
            return CellResult(hp, scores, float("nan"), degenerate, error=f"fold {f}: {exc}")
        score, flag = lenient_balanced_accuracy(fd.y_val, predict(model, fd.X_val))
        scores.append(score)
        if flag:
            degenerate.append(f)
    return CellResult(hp, scores, float(np.mean(scores)), degenerate)


_WORKER: dict = {}


def _init_worker(algorithm, folds, seed):
    _WORKER.update(algorithm=algorithm, folds=folds, seed=seed)


def _run_cell(hp):
    return evaluate_cell(_WORKER["algorithm"], hp, _WORKER["folds"], _WORKER["seed"])


def pick_winner(cells: list[CellResult]) -> int:
    best, best_mean = -1, -np.inf
    for i, c in enumerate(cells):
        if c.error is None and c.mean > best_mean:
            best, best_mean = i, c.mean
    if best < 0:
        raise ModelError("every grid cell failed")
    return best


def grid_search(X1, X2, y, algorithm: str, grid: ParamGrid | None = None,
                config: PipelineConfig = PipelineConfig(), seed: int = DEFAULT_SEED,
                k: int = DEFAULT_FOLDS, jobs: int = 1) -> CvResult:
    """Evaluate every distinct grid cell on ``k`` stratified folds.

    ``X1`` is the raw audio block (NaN allowed); ``X2`` the raw
    demographic/symptom block or None.
    """
    grid = grid or ParamGrid()
    X1 = np.asarray(X1, dtype=float)
    X2 = None if X2 is None or np.asarray(X2).shape[1] == 0 else np.asarray(X2, dtype=float)
    y = np.asarray(y)
    folds = stratified_kfold(y, k, seed)
    data = prepare_folds(X1, X2, y, algorithm, folds, config, seed)
    cells = grid.cells(algorithm)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(algorithm, data, seed)) as ex:
            results = list(ex.map(_run_cell, cells))
    else:
        results = [evaluate_cell(algorithm, hp, data, seed) for hp in cells]
    for r in results:
        if r.error:
            log.warning("%s cell %s failed: %s", algorithm, r.hyperparams, r.error)
    return CvResult(algorithm, results, pick_winner(results), seed, k, config.select_scope)
