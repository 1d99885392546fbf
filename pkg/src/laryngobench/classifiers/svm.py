"""Soft-margin kernel SVM trained by SMO with second-order working-set selection.

Dual problem (labels y in {-1, +1})::

    min_a  0.5 a'Qa - e'a     Q_ij = y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C_i,   y'a = 0

``C_i`` is ``C`` times the class weight of sample ``i``.  Iteration stops when
the maximal KKT violation ``m(a) - M(a)`` falls below ``tol`` or after
``max_iter`` updates.
"""

from __future__ import annotations

import numpy as np

from laryngobench.classifiers.base import FittedModel, ModelError, check_xy, sample_weights

TAU = 1e-12


def resolve_gamma(gamma, X: np.ndarray) -> float:
    if gamma is None:  # unused by the linear kernel
        return 1.0
    if gamma == "scale":
        var = X.var()
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    if gamma == "auto":
        return 1.0 / X.shape[1]
    return float(gamma)


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float, degree: int) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel in ("poly", "polynomial"):
        return (gamma * (A @ B.T)) ** degree
    if kernel == "rbf":
        sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if kernel == "sigmoid":
        return np.tanh(gamma * (A @ B.T))
    raise ModelError(f"unknown kernel {kernel!r}")


def smo(K: np.ndarray, y: np.ndarray, C: np.ndarray, tol: float = 1e-3, max_iter: int | None = None):
    """Solve the dual; returns ``(alpha, rho, n_iter, converged, gap)``.

    Decision values are ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    n = y.size
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    yf = y.astype(float)
    Q = K * np.outer(yf, yf)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    converged = False
    it = 0
    gap = np.inf
    pos = yf > 0
    while it < max_iter:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        score = -yf * G
        up_scores = np.where(up, score, -np.inf)
        i = int(np.argmax(up_scores))
        m = up_scores[i]
        low_scores = np.where(low, score, np.inf)
        M = low_scores.min()
        gap = m - M
        if gap < tol:
            converged = True
            break
        # second-order choice of j among violating pairs
        b = m - score
        cand = low & (score < m)
        a = diag[i] + diag - 2.0 * yf[i] * yf * Q[i]
        a = np.where(a > 0, a, TAU)
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))

        yi, yj = yf[i], yf[j]
        Ci, Cj = C[i], C[j]
        old_ai, old_aj = alpha[i], alpha[j]
        if yi != yj:
            quad = diag[i] + diag[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            ai, aj = alpha[i] + delta, alpha[j] + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            elif aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            ai, aj = alpha[i] - delta, alpha[j] + delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += Q[i] * (ai - old_ai) + Q[j] * (aj - old_aj)
        it += 1

    # bias from free vectors, else midpoint of the feasible interval
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yf[free] * G[free]))
    else:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        ub_mask = np.where(pos, at_lower, at_upper)
        lb_mask = np.where(pos, at_upper, at_lower)
        ygrad = yf * G
        ub = ygrad[ub_mask].min() if ub_mask.any() else np.inf
        lb = ygrad[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0) if np.isfinite(ub + lb) else 0.0
    return alpha, rho, it, converged, float(gap)


def fit_svm(X, y, hp: dict | None = None, class_weights: dict | None = None,
            tol: float = 1e-3, max_iter: int | None = None) -> FittedModel:
    hp = {"C": 1.0, "gamma": "scale", "degree": 3, "kernel": "rbf", **(hp or {})}
    X, y = check_xy(X, y)
    if np.unique(y).size < 2:
        raise ModelError("SVM needs both classes in the training data")
    gamma = resolve_gamma(hp["gamma"], X)
    kernel = "poly" if hp["kernel"] == "polynomial" else hp["kernel"]
    degree = int(hp["degree"]) if hp["degree"] is not None else 3
    ys = np.where(y == 1, 1, -1)
    Ci = float(hp["C"]) * sample_weights(y, class_weights)
    K = kernel_matrix(X, X, kernel, gamma, degree)
    alpha, rho, n_iter, converged, gap = smo(K, ys, Ci, tol=tol, max_iter=max_iter)
    sv = alpha > 0
    return FittedModel(
        algorithm="svm",
        hyperparams=dict(hp),
        params={
            "support_vectors": X[sv].copy(),
            "dual_coef": (alpha[sv] * ys[sv]).astype(float),
            "rho": np.array([rho]),
        },
        meta={"n_features": X.shape[1], "n_iter": int(n_iter), "converged": bool(converged),
              "kkt_gap": gap, "gamma_value": gamma, "kernel": kernel, "degree": degree,
              "n_support": int(sv.sum())},
    )


def svm_scores(model: FittedModel, X: np.ndarray) -> np.ndarray:
    sv = model.params["support_vectors"]
    if sv.shape[0] == 0:
        return np.full(X.shape[0], -model.params["rho"][0])
    K = kernel_matrix(X, sv, model.meta["kernel"], model.meta["gamma_value"], model.meta["degree"])
    return K @ model.params["dual_coef"] - model.params["rho"][0]
