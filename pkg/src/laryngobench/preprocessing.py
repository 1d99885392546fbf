"""Imputation, z-scoring, decision-tree feature selection, class weights and SMOTE.

Every ``fit_*`` function sees training rows only; the returned state objects
are immutable and applied to any other matrix with ``.apply``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# imputation and scaling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ImputerState:
    strategy: str  # "mean" | "zero"
    fill: np.ndarray | None = None

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=float, copy=True)
        mask = np.isnan(X)
        if not mask.any():
            return X
        if self.strategy == "zero":
            X[mask] = 0.0
        else:
            X[mask] = np.broadcast_to(self.fill, X.shape)[mask]
        return X


def fit_imputer(train: np.ndarray, strategy: str = "mean", names: Sequence[str] | None = None) -> ImputerState:
    train = np.asarray(train, dtype=float)
    if strategy == "zero":
        return ImputerState("zero")
    if strategy != "mean":
        raise ValueError(f"unknown imputation strategy {strategy!r}")
    observed = ~np.isnan(train)
    counts = observed.sum(axis=0)
    if (counts == 0).any():
        j = int(np.flatnonzero(counts == 0)[0])
        label = names[j] if names is not None else f"#{j}"
        raise ValueError(f"feature {label} has no observed training values; cannot mean-impute")
    fill = np.where(observed, train, 0.0).sum(axis=0) / counts
    return ImputerState("mean", fill)


def fit_apply_impute(train, apply_to, strategy: str = "mean", names=None):
    state = fit_imputer(train, strategy, names)
    return state, state.apply(apply_to)


@dataclass(frozen=True)
class ScalerState:
    mean: np.ndarray
    std: np.ndarray  # population convention; constant columns stored as 1

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def fit_scaler(train: np.ndarray) -> ScalerState:
    train = np.asarray(train, dtype=float)
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    # a constant column scales to exactly zero
    const = np.all(train == train[:1], axis=0) if train.shape[0] else np.ones(train.shape[1], bool)
    std = np.where(const | (std == 0), 1.0, std)
    mean = np.where(const & (train.shape[0] > 0), train[0] if train.shape[0] else 0.0, mean)
    return ScalerState(mean, std)


def fit_apply_zscore(train, apply_to):
    state = fit_scaler(train)
    return state, state.apply(apply_to)


# --------------------------------------------------------------------------
# CART feature selection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 10
    min_samples_leaf: int = 5
    seed: int = 0


@dataclass(frozen=True)
class SelectorState:
    selected_indices: np.ndarray
    importances: np.ndarray
    threshold: float
    fallback: bool = False

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X)[:, self.selected_indices]


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    p = np.divide(pos, total, out=np.zeros_like(pos, dtype=float), where=total > 0)
    return 2.0 * p * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best Gini split over all features; ties go to the lowest feature index,
    then the lowest threshold."""
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    left_pos = np.cumsum(ys, axis=0)[:-1]  # (n-1, d): split after row i
    left_n = np.arange(1, n)[:, None].astype(float)
    right_n = n - left_n
    total_pos = y.sum()
    right_pos = total_pos - left_pos
    parent = _gini(np.array(total_pos, float), np.array(float(n)))
    child = (left_n * _gini(left_pos, left_n) + right_n * _gini(right_pos, right_n)) / n
    gain = parent - child
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    gain = np.where(valid, gain, -np.inf)
    # feature-major flattening so argmax prefers the lowest feature index
    flat = gain.T.ravel()
    k = int(np.argmax(flat))
    if not np.isfinite(flat[k]) or flat[k] <= 1e-12:
        return None
    j, i = divmod(k, n - 1)
    threshold = 0.5 * (xs[i, j] + xs[i + 1, j])
    return j, threshold, float(flat[k])


def tree_importances(X: np.ndarray, y: np.ndarray, config: TreeConfig = TreeConfig()) -> np.ndarray:
    """Gini importances of a CART tree grown depth-first on ``(X, y)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    imp = np.zeros(d)
    stack = [(np.arange(n), 0)]
    while stack:
        idx, depth = stack.pop()
        if depth >= config.max_depth or idx.size < 2 * config.min_samples_leaf:
            continue
        yn = y[idx]
        if yn.min() == yn.max():
            continue
        split = _best_split(X[idx], yn, config.min_samples_leaf)
        if split is None:
            continue
        j, thr, gain = split
        imp[j] += idx.size / n * gain
        go_left = X[idx, j] <= thr
        stack.append((idx[~go_left], depth + 1))
        stack.append((idx[go_left], depth + 1))
    return imp


def fit_tree_selector(X: np.ndarray, y: np.ndarray, config: TreeConfig = TreeConfig()) -> SelectorState:
    """Keep features whose importance exceeds the mean importance (at least one)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("need at least one feature")
    if np.unique(y).size < 2:
        raise ValueError("feature selection needs both classes")
    raw = tree_importances(X, y, config)
    total = raw.sum()
    importances = raw / total if total > 0 else np.full(X.shape[1], 1.0 / X.shape[1])
    threshold = float(importances.mean())
    selected = np.flatnonzero(importances > threshold)
    fallback = selected.size == 0
    if fallback:
        selected = np.array([int(np.argmax(importances))])
    return SelectorState(selected.astype(np.int64), importances, threshold, fallback)


# --------------------------------------------------------------------------
# imbalance handling
# --------------------------------------------------------------------------

def compute_class_weights(labels) -> dict[int, float]:
    """Balanced weights ``N / (2 * N_c)``."""
    y = np.asarray(labels)
    counts = {c: int((y == c).sum()) for c in (0, 1)}
    if min(counts.values()) == 0:
        raise ValueError("class weights need both classes present")
    n = y.size
    return {c: n / (2.0 * counts[c]) for c in (0, 1)}


def smote_oversample(X: np.ndarray, y: np.ndarray, k: int = 5, seed: int = 0):
    """Oversample the minority class to the majority count with SMOTE.

    Synthetic rows are appended after the original rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    counts = {c: int((y == c).sum()) for c in np.unique(y)}
    if len(counts) != 2:
        raise ValueError("SMOTE needs exactly two classes")
    minority = min(counts, key=lambda c: (counts[c], c))
    majority = max(counts, key=lambda c: (counts[c], -c))
    need = counts[majority] - counts[minority]
    if need == 0:
        return X.copy(), y.copy()
    members = X[y == minority]
    m = members.shape[0]
    if m < 2:
        raise ValueError("SMOTE needs at least two minority samples")
    if k > m - 1:
        log.warning("SMOTE k=%d exceeds minority size - 1; clamped to %d", k, m - 1)
        k = m - 1
    sq = (members ** 2).sum(axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * members @ members.T
    np.fill_diagonal(dist, np.inf)
    neighbours = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rng = np.random.default_rng(seed)
    base = rng.integers(0, m, need)
    nn = neighbours[base, rng.integers(0, k, need)]
    lam = rng.random(need)[:, None]
    synthetic = members[base] + lam * (members[nn] - members[base])
    X_out = np.vstack([X, synthetic])
    y_out = np.concatenate([y, np.full(need, minority, dtype=y.dtype)])
    return X_out, y_out


def assemble_input(x1: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
    """Audio block followed by the demographic/symptom block."""
    x1 = np.asarray(x1, dtype=float)
    if x2 is None or np.asarray(x2).shape[-1] == 0:
        return x1
    return np.concatenate([x1, np.asarray(x2, dtype=float)], axis=-1)
