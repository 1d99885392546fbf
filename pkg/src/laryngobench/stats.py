"""Exact and classical two-sample tests used for dataset comparison and fairness.

All tests are two-sided.  p-values are clipped to [0, 1].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    sidedness: str = "two-sided"
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "sidedness": self.sidedness,
            **({"details": self.details} if self.details else {}),
        }


TestResult.__test__ = False  # keep pytest from collecting it


# --------------------------------------------------------------------------
# Fisher exact
# --------------------------------------------------------------------------

def _log_hypergeom(a: int, row1: int, col1: int, n: int) -> float:
    # log P(X = a), X ~ Hypergeom(N=n, K=col1, draws=row1)
    return (
        math.lgamma(row1 + 1) + math.lgamma(n - row1 + 1)
        + math.lgamma(col1 + 1) + math.lgamma(n - col1 + 1)
        - math.lgamma(n + 1)
        - math.lgamma(a + 1) - math.lgamma(row1 - a + 1)
        - math.lgamma(col1 - a + 1) - math.lgamma(n - row1 - col1 + a + 1)
    )


def fisher_exact(table) -> TestResult:
    """Two-sided Fisher exact test on a 2x2 table ``[[a, b], [c, d]]``.

    Sums the probabilities of every table with the observed margins whose
    probability does not exceed that of the observed table.
    """
    (a, b), (c, d) = np.asarray(table, dtype=np.int64).tolist()
    if min(a, b, c, d) < 0:
        raise ValueError("contingency table entries must be non-negative")
    n = a + b + c + d
    if n == 0:
        raise ValueError("contingency table is empty")
    row1, col1 = a + b, a + c
    odds = (a * d) / (b * c) if b * c else (math.inf if a * d else math.nan)

    lo, hi = max(0, row1 + col1 - n), min(row1, col1)
    if lo == hi:
        return TestResult("fisher_exact", odds, 1.0, details={"table": [[a, b], [c, d]]})

    log_obs = _log_hypergeom(a, row1, col1, n)
    logs = np.array([_log_hypergeom(x, row1, col1, n) for x in range(lo, hi + 1)])
    keep = logs <= log_obs + 1e-12
    # subtract the max before exponentiating so tiny tails do not underflow
    m = logs.max()
    p = float(np.exp(logs[keep] - m).sum() / np.exp(logs - m).sum())
    return TestResult("fisher_exact", odds, min(1.0, max(0.0, p)),
                      details={"table": [[a, b], [c, d]]})


# --------------------------------------------------------------------------
# Student t distribution via the regularized incomplete beta function
# --------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 3e-16) -> float:
    # modified Lentz continued fraction for I_x(a, b)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


def t_test(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Welch's unequal-variance t-test."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or y.size < 2:
        raise ValueError("t_test needs at least two observations per sample")
    vx, vy = x.var(ddof=1) / x.size, y.var(ddof=1) / y.size
    diff = x.mean() - y.mean()
    se2 = vx + vy
    if se2 == 0.0:
        if diff == 0.0:
            return TestResult("welch_t_test", 0.0, 1.0, details={"df": math.nan})
        return TestResult("welch_t_test", math.copysign(math.inf, diff), 0.0,
                          details={"df": math.nan, "degenerate": True})
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (vx ** 2 / (x.size - 1) + vy ** 2 / (y.size - 1))
    return TestResult("welch_t_test", float(t), t_two_sided_p(t, df), details={"df": float(df)})


# --------------------------------------------------------------------------
# Mann-Whitney U
# --------------------------------------------------------------------------

def midranks(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=float)
    # boundaries of runs of equal values
    edges = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [values.size]))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def _exact_u_distribution(nx: int, ny: int) -> np.ndarray:
    # counts[u] = number of rank subsets of size nx giving U = u
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    base = nx * (nx + 1) // 2
    for combo in itertools.combinations(range(1, nx + ny + 1), nx):
        counts[sum(combo) - base] += 1
    return counts


EXACT_MAX_TOTAL = 12


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided Mann-Whitney U test.

    The exact null distribution is enumerated when the pooled sample has at
    most 12 observations and no ties; otherwise a normal approximation with
    tie and continuity corrections is used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = x.size, y.size
    if nx == 0 or ny == 0:
        raise ValueError("mann_whitney_u needs non-empty samples")
    pooled = np.concatenate([x, y])
    ranks = midranks(pooled)
    u = float(ranks[:nx].sum() - nx * (nx + 1) / 2.0)
    has_ties = np.unique(pooled).size < pooled.size

    if nx + ny <= EXACT_MAX_TOTAL and not has_ties:
        counts = _exact_u_distribution(nx, ny)
        total = counts.sum()
        k = int(round(u))
        p_low = counts[: k + 1].sum() / total
        p_high = counts[k:].sum() / total
        p = min(1.0, 2.0 * min(p_low, p_high))
        return TestResult("mann_whitney_u", u, float(p), details={"method": "exact"})

    n = nx + ny
    mu = nx * ny / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float((tie_counts ** 3 - tie_counts).sum())
    var = nx * ny / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0.0:
        return TestResult("mann_whitney_u", u, 1.0, details={"method": "asymptotic"})
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2.0))
    return TestResult("mann_whitney_u", u, min(1.0, p), details={"method": "asymptotic", "z": z})
