"""From-scratch binary classifiers sharing one fit / score / predict contract.

Scores are on a margin or logit scale; ``predict`` returns 1 (malignant)
where the score is >= 0.
"""

from __future__ import annotations

import numpy as np

from laryngobench.classifiers.base import FittedModel, ModelError, check_xy
from laryngobench.classifiers.logreg import fit_logreg, logreg_scores
from laryngobench.classifiers.mlp import fit_mlp, mlp_scores
from laryngobench.classifiers.svm import fit_svm, svm_scores

ALGORITHMS = ("svm", "mlp", "logreg")

_SCORERS = {"logreg": logreg_scores, "svm": svm_scores, "mlp": mlp_scores}


def score(model: FittedModel, X) -> np.ndarray:
    X, _ = check_xy(X)
    if X.shape[1] != model.n_features:
        raise ModelError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return _SCORERS[model.algorithm](model, X)


def predict(model: FittedModel, X) -> np.ndarray:
    return (score(model, X) >= 0).astype(np.int8)


def probability(model: FittedModel, X) -> np.ndarray:
    """Sigmoid of the score; a calibrated probability only for logreg and mlp."""
    from scipy.special import expit

    return expit(score(model, X))


def fit(algorithm: str, X, y, hp: dict, class_weights: dict | None = None, seed: int = 0) -> FittedModel:
    if algorithm == "logreg":
        return fit_logreg(X, y, hp, class_weights)
    if algorithm == "svm":
        return fit_svm(X, y, hp, class_weights)
    if algorithm == "mlp":
        return fit_mlp(X, y, hp, seed=seed)
    raise ModelError(f"unknown algorithm {algorithm!r}")


__all__ = ["ALGORITHMS", "FittedModel", "ModelError", "fit", "fit_logreg", "fit_mlp", "fit_svm",
           "predict", "probability", "score"]
