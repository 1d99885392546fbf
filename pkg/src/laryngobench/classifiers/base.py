from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FittedModel:
    """Learned parameters of one classifier.

    ``params`` holds numpy arrays only; ``meta`` holds JSON-friendly scalars
    (iterations run, converged flag, seed, feature count).
    """

    algorithm: str
    hyperparams: dict
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return int(self.meta["n_features"])


def check_xy(X, y=None) -> tuple[np.ndarray, np.ndarray | None]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ModelError("X must be a 2-D array")
    if not np.isfinite(X).all():
        raise ModelError("X contains non-finite values")
    if y is None:
        return X, None
    y = np.asarray(y).astype(np.int8)
    if y.shape != (X.shape[0],):
        raise ModelError("y must have one label per row of X")
    if not np.isin(y, (0, 1)).all():
        raise ModelError("labels must be 0 (benign) or 1 (malignant)")
    return X, y


def sample_weights(y: np.ndarray, class_weights: dict | None) -> np.ndarray:
    if class_weights is None:
        return np.ones(y.size)
    return np.where(y == 1, class_weights[1], class_weights[0]).astype(float)
