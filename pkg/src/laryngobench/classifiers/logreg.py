"""Class-weighted logistic regression.

Objective, with per-sample class weights ``s_i`` and ``lam = 1 / C``::

    sum_i s_i * logloss(y_i, x_i.w + b) + lam * R(w)

    R(w) = ||w||_1                                   (l1)
           0.5 ||w||^2                               (l2)
           r ||w||_1 + 0.5 (1 - r) ||w||^2           (elasticnet, r = l1_ratio)
           0                                         (none)

The intercept is never penalized.  Two optimizers are available: accelerated
proximal gradient (covers every penalty) and damped Newton (l2 / none).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from laryngobench.classifiers.base import FittedModel, ModelError, check_xy, sample_weights

GRAD_TOL = 1e-6

# solver names from the hyperparameter grid -> optimizer actually used
SOLVER_MAP = {
    "newton-cg": "newton",
    "lbfgs": "newton",
    "liblinear": "proximal",
    "saga": "proximal",
}


def resolve_optimizer(solver: str, penalty: str) -> str:
    opt = SOLVER_MAP.get(solver, solver)
    if opt not in ("newton", "proximal"):
        raise ModelError(f"unknown logistic regression solver {solver!r}")
    if opt == "newton" and penalty in ("l1", "elasticnet"):
        return "proximal"
    return opt


def _penalty_split(penalty: str, C: float, l1_ratio: float) -> tuple[float, float]:
    """Return (l1 strength, l2 strength)."""
    if penalty in ("none", None):
        return 0.0, 0.0
    lam = 1.0 / C
    if penalty == "l1":
        return lam, 0.0
    if penalty == "l2":
        return 0.0, lam
    if penalty == "elasticnet":
        return lam * l1_ratio, lam * (1.0 - l1_ratio)
    raise ModelError(f"unknown penalty {penalty!r}")


def _smooth_grad(Xb, y, s, theta, l2):
    p = expit(Xb @ theta)
    g = Xb.T @ (s * (p - y))
    g[:-1] += l2 * theta[:-1]
    return g, p


def _objective(Xb, y, s, theta, l1, l2):
    z = Xb @ theta
    loss = np.sum(s * (np.logaddexp(0.0, z) - y * z))
    w = theta[:-1]
    return loss + l1 * np.abs(w).sum() + 0.5 * l2 * (w @ w)


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _prox_step(theta, grad, step, l1):
    out = theta - step * grad
    out[:-1] = _soft_threshold(out[:-1], step * l1)
    return out


def _fit_proximal(Xb, y, s, l1, l2, max_iter):
    n, d1 = Xb.shape
    # Lipschitz constant of the smooth part
    L = 0.25 * np.linalg.norm(Xb * np.sqrt(s)[:, None], 2) ** 2 + l2
    step = 1.0 / max(L, 1e-12)
    theta = np.zeros(d1)
    z = theta.copy()
    t = 1.0
    obj = _objective(Xb, y, s, theta, l1, l2)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g, _ = _smooth_grad(Xb, y, s, z, l2)
        new = _prox_step(z, g, step, l1)
        new_obj = _objective(Xb, y, s, new, l1, l2)
        if new_obj > obj:
            # monotone restart
            t = 1.0
            g, _ = _smooth_grad(Xb, y, s, theta, l2)
            new = _prox_step(theta, g, step, l1)
            new_obj = _objective(Xb, y, s, new, l1, l2)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = new + ((t - 1.0) / t_next) * (new - theta)
        theta, obj, t = new, new_obj, t_next
        # gradient mapping at the current iterate
        g, _ = _smooth_grad(Xb, y, s, theta, l2)
        mapping = (theta - _prox_step(theta, g, step, l1)) / step
        if np.linalg.norm(mapping) < GRAD_TOL:
            converged = True
            break
    return theta, it, converged


def _fit_newton(Xb, y, s, l2, max_iter):
    n, d1 = Xb.shape
    theta = np.zeros(d1)
    reg = np.full(d1, l2)
    reg[-1] = 0.0
    converged = False
    it = 0
    obj = _objective(Xb, y, s, theta, 0.0, l2)
    for it in range(1, max_iter + 1):
        g, p = _smooth_grad(Xb, y, s, theta, l2)
        if np.linalg.norm(g) < GRAD_TOL:
            converged = True
            it -= 1
            break
        h = s * p * (1.0 - p)
        H = (Xb * h[:, None]).T @ Xb + np.diag(reg) + 1e-10 * np.eye(d1)
        try:
            direction = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            direction = np.linalg.lstsq(H, g, rcond=None)[0]
        step = 1.0
        while step > 1e-10:
            cand = theta - step * direction
            cand_obj = _objective(Xb, y, s, cand, 0.0, l2)
            if cand_obj <= obj - 1e-4 * step * (g @ direction):
                break
            step *= 0.5
        else:
            break
        theta, obj = cand, cand_obj
    else:
        g, _ = _smooth_grad(Xb, y, s, theta, l2)
        converged = bool(np.linalg.norm(g) < GRAD_TOL)
    return theta, it, converged


def fit_logreg(X, y, hp: dict | None = None, class_weights: dict | None = None) -> FittedModel:
    hp = {"penalty": "l2", "C": 1.0, "max_iterations": 100, "l1_ratio": 0.5, "solver": "lbfgs", **(hp or {})}
    X, y = check_xy(X, y)
    penalty = "none" if hp["penalty"] in (None, "none", "None") else hp["penalty"]
    C = float(hp["C"]) if hp["C"] is not None else 1.0
    l1, l2 = _penalty_split(penalty, C, float(hp.get("l1_ratio") or 0.0))
    optimizer = resolve_optimizer(hp["solver"], penalty)
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    s = sample_weights(y, class_weights)
    yf = y.astype(float)
    if optimizer == "newton":
        theta, n_iter, converged = _fit_newton(Xb, yf, s, l2, int(hp["max_iterations"]))
    else:
        theta, n_iter, converged = _fit_proximal(Xb, yf, s, l1, l2, int(hp["max_iterations"]))
    return FittedModel(
        algorithm="logreg",
        hyperparams=dict(hp),
        params={"coef": theta[:-1].copy(), "intercept": np.array([theta[-1]])},
        meta={"n_features": X.shape[1], "n_iter": int(n_iter), "converged": bool(converged),
              "optimizer": optimizer},
    )


def logreg_scores(model: FittedModel, X: np.ndarray) -> np.ndarray:
    return X @ model.params["coef"] + model.params["intercept"][0]
