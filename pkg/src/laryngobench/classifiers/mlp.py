"""Feed-forward network with a single sigmoid output unit.

Loss is mean binary cross-entropy plus ``alpha / (2 n) * sum ||W||^2`` over
weight matrices.  Training uses mini-batches of ``min(200, n)`` rows, a 10%
stratified validation split for early stopping (patience 10 epochs, best
weights restored) and at most 200 epochs.

Learning-rate schedules (``constant``, ``invscaling``, ``adaptive``) apply to
the ``sgd`` solver; ``adam`` always uses a constant base rate.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from laryngobench.classifiers.base import FittedModel, ModelError, check_xy

LEARNING_RATE = 1e-3
MOMENTUM = 0.9
ALPHA = 1e-4
BATCH = 200
MAX_EPOCHS = 200
PATIENCE = 10
VALIDATION_FRACTION = 0.1
TOL = 1e-4
POWER_T = 0.5


def _act(name: str):
    if name == "relu":
        return lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)
    if name == "tanh":
        return np.tanh, lambda z, a: 1.0 - a * a
    raise ModelError(f"unknown activation {name!r}")


def glorot_init(sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: list[np.ndarray], X: np.ndarray, activation: str):
    """Return pre-activations, activations and the output logit."""
    f, _ = _act(activation)
    acts, pres = [X], []
    a = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = a @ params[2 * k] + params[2 * k + 1]
        pres.append(z)
        a = f(z) if k < n_layers - 1 else z
        acts.append(a)
    return pres, acts, acts[-1][:, 0]


def loss_and_grads(params: list[np.ndarray], X: np.ndarray, y: np.ndarray, activation: str,
                   alpha: float = ALPHA) -> tuple[float, list[np.ndarray]]:
    n = X.shape[0]
    _, dact = _act(activation)
    pres, acts, logit = forward(params, X, activation)
    loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
    loss += alpha / (2 * n) * sum(float((W * W).sum()) for W in params[0::2])
    grads = [None] * len(params)
    delta = ((expit(logit) - y) / n)[:, None]
    n_layers = len(params) // 2
    for k in range(n_layers - 1, -1, -1):
        W = params[2 * k]
        grads[2 * k] = acts[k].T @ delta + (alpha / n) * W
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = (delta @ W.T) * dact(pres[k - 1], acts[k])
    return loss, grads


def _validation_split(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros(y.size, dtype=bool)
    for c in (0, 1):
        members = np.flatnonzero(y == c)
        k = int(round(VALIDATION_FRACTION * members.size))
        if members.size >= 2 and k >= 1:
            mask[rng.permutation(members)[:k]] = True
    return mask


class _Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        lr_t = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr_t * m / (np.sqrt(v) + eps)


class _Sgd:
    """Nesterov momentum SGD."""

    def __init__(self, params, lr, schedule):
        self.lr0 = self.lr = lr
        self.schedule = schedule
        self.vel = [np.zeros_like(p) for p in params]
        self.seen = 0

    def step(self, params, grads, batch_size):
        for p, g, v in zip(params, grads, self.vel):
            v *= MOMENTUM
            v -= self.lr * g
            p += MOMENTUM * v - self.lr * g
        self.seen += batch_size
        if self.schedule == "invscaling":
            self.lr = self.lr0 / (self.seen + 1) ** POWER_T


def fit_mlp(X, y, hp: dict | None = None, seed: int = 0, initial_params: list[np.ndarray] | None = None,
            max_epochs: int = MAX_EPOCHS, early_stopping: bool = True) -> FittedModel:
    hp = {"hidden_layer_sizes": (100,), "activation": "relu", "solver": "adam",
          "learning_rate": "constant", **(hp or {})}
    X, y = check_xy(X, y)
    hidden = tuple(int(h) for h in hp["hidden_layer_sizes"])
    activation = hp["activation"]
    solver = hp["solver"]
    schedule = hp["learning_rate"] or "constant"
    if solver not in ("adam", "sgd"):
        raise ModelError(f"unsupported MLP solver {solver!r} (lbfgs is not implemented)")
    if schedule not in ("constant", "invscaling", "adaptive"):
        raise ModelError(f"unknown learning-rate schedule {schedule!r}")
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hidden, 1]
    params = [p.copy() for p in initial_params] if initial_params is not None else glorot_init(sizes, rng)
    yf = y.astype(float)

    val_mask = _validation_split(y, rng) if early_stopping else np.zeros(y.size, bool)
    use_val = early_stopping and val_mask.any() and (~val_mask).sum() >= 2
    Xt, yt = (X[~val_mask], yf[~val_mask]) if use_val else (X, yf)
    Xv, yv = (X[val_mask], yf[val_mask]) if use_val else (X, yf)

    opt = _Adam(params, LEARNING_RATE) if solver == "adam" else _Sgd(params, LEARNING_RATE, schedule)
    batch = min(BATCH, Xt.shape[0])
    best_loss, best_params, stall, adaptive_stall = np.inf, [p.copy() for p in params], 0, 0
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(Xt.shape[0])
        for start in range(0, Xt.shape[0], batch):
            idx = order[start:start + batch]
            _, grads = loss_and_grads(params, Xt[idx], yt[idx], activation)
            if solver == "adam":
                opt.step(params, grads)
            else:
                opt.step(params, grads, idx.size)
        val_loss, _ = loss_and_grads(params, Xv, yv, activation, alpha=0.0)
        if not np.isfinite(val_loss) or not all(np.isfinite(p).all() for p in params):
            raise ModelError(f"MLP training diverged at epoch {epoch}")
        if val_loss < best_loss - TOL:
            best_loss, best_params, stall, adaptive_stall = val_loss, [p.copy() for p in params], 0, 0
        else:
            stall += 1
            adaptive_stall += 1
            if solver == "sgd" and schedule == "adaptive" and adaptive_stall >= 2:
                opt.lr /= 5.0
                adaptive_stall = 0
                if opt.lr < 1e-6:
                    break
            if stall >= PATIENCE:
                break
    final = best_params if early_stopping else params
    return FittedModel(
        algorithm="mlp",
        hyperparams={**hp, "hidden_layer_sizes": list(hidden)},
        params={f"p{k}": p for k, p in enumerate(final)},
        meta={"n_features": X.shape[1], "n_iter": int(epoch), "converged": bool(stall >= PATIENCE),
              "seed": int(seed), "activation": activation, "n_layers": len(final) // 2,
              "best_validation_loss": float(best_loss)},
    )


def mlp_param_list(model: FittedModel) -> list[np.ndarray]:
    return [model.params[f"p{k}"] for k in range(2 * model.meta["n_layers"])]


def mlp_scores(model: FittedModel, X: np.ndarray) -> np.ndarray:
    return forward(mlp_param_list(model), X, model.meta["activation"])[2]
