"""Predictive metrics with percentile-bootstrap confidence intervals.

Malignant (label 1) is the positive class throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from laryngobench.stats import midranks


class MetricError(ValueError):
    """Raised when a metric is not computable for the given labels."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def n(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


def _as_binary(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("labels must be binary (0 = benign, 1 = malignant)")
    return arr.astype(np.int8)


def confusion(labels_true, labels_pred) -> ConfusionMatrix:
    y = _as_binary(labels_true)
    p = _as_binary(labels_pred)
    if y.size != p.size:
        raise ValueError(f"length mismatch: {y.size} true labels vs {p.size} predictions")
    if y.size == 0:
        raise ValueError("confusion matrix of an empty input is undefined")
    return ConfusionMatrix(
        tp=int(((y == 1) & (p == 1)).sum()),
        fn=int(((y == 1) & (p == 0)).sum()),
        tn=int(((y == 0) & (p == 0)).sum()),
        fp=int(((y == 0) & (p == 1)).sum()),
    )


def classification_metrics(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Return ``(balanced_accuracy, sensitivity, specificity)``."""
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise MetricError("both classes must be present to compute sensitivity and specificity")
    sens = cm.tp / (cm.tp + cm.fn)
    spec = cm.tn / (cm.tn + cm.fp)
    return (sens + spec) / 2.0, sens, spec


def balanced_accuracy(labels_true, labels_pred) -> float:
    return classification_metrics(confusion(labels_true, labels_pred))[0]


def sensitivity(labels_true, labels_pred) -> float:
    return classification_metrics(confusion(labels_true, labels_pred))[1]


def specificity(labels_true, labels_pred) -> float:
    return classification_metrics(confusion(labels_true, labels_pred))[2]


def lenient_balanced_accuracy(labels_true, labels_pred) -> tuple[float, bool]:
    """Balanced accuracy where an absent class contributes recall 0.

    Returns ``(score, degenerate)``; used for CV folds whose validation split
    lacks a class.
    """
    y = _as_binary(labels_true)
    p = _as_binary(labels_pred)
    recalls = []
    for c in (0, 1):
        mask = y == c
        recalls.append(float((p[mask] == c).mean()) if mask.any() else 0.0)
    degenerate = not ((y == 0).any() and (y == 1).any())
    return sum(recalls) / 2.0, degenerate


def auroc(labels_true, scores) -> float:
    """Area under the ROC curve via the rank-sum identity (midranks for ties)."""
    y = _as_binary(labels_true)
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise ValueError("labels and scores must have the same length")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC needs both classes")
    ranks = midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# metric name -> (function, uses scores instead of labels)
METRICS: dict[str, tuple[Callable, bool]] = {
    "balanced_accuracy": (balanced_accuracy, False),
    "sensitivity": (sensitivity, False),
    "specificity": (specificity, False),
    "auroc": (auroc, True),
}


@dataclass(frozen=True)
class Interval:
    point: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {"point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high}


def bootstrap_ci(
    labels_true,
    outputs,
    metric: Callable,
    n_resamples: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
    max_redraws: int = 10,
) -> tuple[float, float, int]:
    """Percentile bootstrap interval of ``metric(labels_true[idx], outputs[idx])``.

    Resample ``i`` draws from its own generator seeded by ``(seed, i)``.  A
    resample missing either class is redrawn up to ``max_redraws`` times and
    otherwise skipped.  Returns ``(low, high, n_skipped)``.
    """
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    y = _as_binary(labels_true)
    out = np.asarray(outputs)
    n = y.size
    stats = []
    skipped = 0
    for i in range(n_resamples):
        rng = np.random.default_rng([seed, i])
        for _ in range(max_redraws):
            idx = rng.integers(0, n, n)
            yb = y[idx]
            if 0 < yb.sum() < n:
                stats.append(metric(yb, out[idx]))
                break
        else:
            skipped += 1
    if len(stats) < 10:
        raise MetricError(f"only {len(stats)} valid bootstrap resamples")
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi), skipped


def metric_report(labels_true, labels_pred, scores, n_resamples: int = 1000, seed: int = 0) -> dict:
    """Point estimates and 95% intervals for all four metrics.

    Each interval is widened if needed so it contains its point estimate.
    Metrics that cannot be computed (a class missing from the test set) are
    reported as ``None`` with a reason.
    """
    labels_pred = np.asarray(labels_pred)
    scores = np.asarray(scores, dtype=float)
    report: dict = {"n": int(np.asarray(labels_true).size), "ci_method": "percentile bootstrap",
                    "n_resamples": n_resamples, "seed": seed, "metrics": {}}
    for name, (fn, uses_scores) in METRICS.items():
        outputs = scores if uses_scores else labels_pred
        try:
            point = fn(labels_true, outputs)
            lo, hi, skipped = bootstrap_ci(labels_true, outputs, fn, n_resamples, seed)
        except MetricError as exc:
            report["metrics"][name] = None
            report.setdefault("not_computable", {})[name] = str(exc)
            continue
        interval = Interval(point, min(lo, point), max(hi, point))
        report["metrics"][name] = interval.to_dict()
        if skipped:
            report.setdefault("skipped_resamples", {})[name] = skipped
    cm = confusion(labels_true, labels_pred)
    report["confusion"] = {"tp": cm.tp, "fn": cm.fn, "tn": cm.tn, "fp": cm.fp}
    return report
