import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import auroc_oracle
from laryngobench.evaluation import (
    ConfusionMatrix,
    MetricError,
    auroc,
    balanced_accuracy,
    bootstrap_ci,
    classification_metrics,
    confusion,
    metric_report,
    sensitivity,
)


def test_confusion_examples():
    y = np.array([1] * 25 + [0] * 635)
    assert confusion(y, y) == ConfusionMatrix(tp=25, fn=0, tn=635, fp=0)
    cm = confusion(y, np.zeros_like(y))
    assert cm.tp == 0 and cm.fn == 25
    with pytest.raises(ValueError):
        confusion([], [])
    with pytest.raises(ValueError):
        confusion([0, 1], [0])


def test_classification_metrics_arithmetic():
    assert classification_metrics(ConfusionMatrix(tp=3, fn=1, tn=5, fp=5)) == (0.625, 0.75, 0.5)
    assert classification_metrics(ConfusionMatrix(tp=4, fn=0, tn=9, fp=0)) == (1.0, 1.0, 1.0)
    with pytest.raises(MetricError):
        classification_metrics(ConfusionMatrix(tp=0, fn=0, tn=3, fp=1))


def test_auroc_examples():
    assert auroc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert auroc([0, 0, 1, 1], [1, 2, 3, 4]) == 1.0
    assert auroc([0, 0, 1, 1], [4, 3, 2, 1]) == 0.0
    assert auroc([0, 1, 0, 1], [7, 7, 7, 7]) == 0.5
    with pytest.raises(MetricError):
        auroc([1, 1], [0.2, 0.3])


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**31 - 1))
def test_auroc_matches_all_pairs(n, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 6, n) / 5.0  # coarse grid forces ties
    assert abs(auroc(y, s) - auroc_oracle(y, s)) < 1e-12


def test_positive_class_swap():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, 80)
    s = rng.normal(size=80) + y
    p = (s > 0.5).astype(int)
    bal, sens, spec = classification_metrics(confusion(y, p))
    bal2, sens2, spec2 = classification_metrics(confusion(1 - y, 1 - p))
    assert (sens2, spec2) == (spec, sens)
    assert auroc(1 - y, -s) == pytest.approx(auroc(y, s), abs=1e-12)
    assert auroc(1 - y, s) == pytest.approx(1 - auroc(y, s), abs=1e-12)


def test_balanced_accuracy_permutation_invariant():
    rng = np.random.default_rng(5)
    y = rng.integers(0, 2, 50)
    p = rng.integers(0, 2, 50)
    perm = rng.permutation(50)
    assert balanced_accuracy(y[perm], p[perm]) == balanced_accuracy(y, p)


def test_bootstrap_degenerate_all_correct():
    y = np.array([1] * 25 + [0] * 635)
    lo, hi, _ = bootstrap_ci(y, y, balanced_accuracy, n_resamples=200, seed=1)
    assert (lo, hi) == (1.0, 1.0)


def test_bootstrap_deterministic_and_shrinks():
    def synthetic(n, seed):
        rng = np.random.default_rng(seed)
        y = np.repeat([0, 1], n // 2)
        pred = np.where(y == 1, rng.random(n) < 0.8, rng.random(n) < 0.2).astype(int)
        return y, pred

    y100, p100 = synthetic(100, 0)
    y1000, p1000 = synthetic(1000, 0)
    a = bootstrap_ci(y100, p100, sensitivity, 500, seed=9)
    assert a == bootstrap_ci(y100, p100, sensitivity, 500, seed=9)
    b = bootstrap_ci(y1000, p1000, sensitivity, 500, seed=9)
    assert b[1] - b[0] < a[1] - a[0]


def test_bootstrap_rejects_few_resamples():
    with pytest.raises(ValueError):
        bootstrap_ci([0, 1], [0, 1], balanced_accuracy, n_resamples=50)


def test_bootstrap_skips_single_class_resamples():
    # one positive among many: a fair share of resamples miss it entirely
    y = np.array([1] + [0] * 4)
    lo, hi, skipped = bootstrap_ci(y, y, balanced_accuracy, n_resamples=100, seed=0)
    assert lo == hi == 1.0
    assert skipped >= 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_report_interval_contains_point(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 60))
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    s = rng.normal(size=n) + rng.uniform(0, 2) * y
    rep = metric_report(y, (s >= 0).astype(int), s, n_resamples=100, seed=seed)
    for m in rep["metrics"].values():
        assert m["ci_low"] <= m["point"] <= m["ci_high"]
