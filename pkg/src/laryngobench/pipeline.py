"""Two-branch preprocessing pipeline feeding the classifiers.

Audio block: mean-impute, z-score, tree selection.  Demographic/symptom
block: zero-impute, z-score.  The blocks are concatenated audio first.
Class imbalance is handled by class weights (svm, logreg) or SMOTE (mlp).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from laryngobench.classifiers import FittedModel, fit
from laryngobench.preprocessing import (
    ImputerState,
    ScalerState,
    SelectorState,
    TreeConfig,
    assemble_input,
    compute_class_weights,
    fit_imputer,
    fit_scaler,
    fit_tree_selector,
    smote_oversample,
)

IMBALANCE_DEFAULT = {"svm": "weights", "logreg": "weights", "mlp": "smote"}
IMBALANCE_MODES = ("default", "weights", "smote", "none")


@dataclass(frozen=True)
class PipelineConfig:
    tree: TreeConfig = field(default_factory=TreeConfig)
    smote_k: int = 5
    select_scope: str = "fold"  # "fold" or "global"
    imbalance: str = "default"

    def __post_init__(self):
        if self.select_scope not in ("fold", "global"):
            raise ValueError(f"select_scope must be 'fold' or 'global', got {self.select_scope!r}")
        if self.imbalance not in IMBALANCE_MODES:
            raise ValueError(f"imbalance must be one of {IMBALANCE_MODES}")

    def imbalance_for(self, algorithm: str) -> str:
        return IMBALANCE_DEFAULT[algorithm] if self.imbalance == "default" else self.imbalance


@dataclass(frozen=True)
class PipelineState:
    audio_imputer: ImputerState
    audio_scaler: ScalerState
    selector: SelectorState
    demo_imputer: ImputerState | None
    demo_scaler: ScalerState | None
    n_audio: int
    n_demo: int

    def transform(self, X1: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
        X1 = np.asarray(X1, dtype=float)
        if X1.ndim != 2 or X1.shape[1] != self.n_audio:
            raise ValueError(f"expected {self.n_audio} audio features, got shape {X1.shape}")
        a = self.selector.apply(self.audio_scaler.apply(self.audio_imputer.apply(X1)))
        if self.n_demo == 0:
            return a
        if X2 is None or np.asarray(X2).shape[1] != self.n_demo:
            raise ValueError(f"expected {self.n_demo} demographic/symptom columns")
        d = self.demo_scaler.apply(self.demo_imputer.apply(X2))
        return assemble_input(a, d)


def fit_audio_selector(X1, y, config: PipelineConfig) -> SelectorState:
    """Selector fitted on impute+scale of the given rows (used for global scope)."""
    imp = fit_imputer(X1, "mean")
    Xs = fit_scaler(imp.apply(X1)).apply(imp.apply(X1))
    return fit_tree_selector(Xs, y, config.tree)


def fit_pipeline(X1, X2, y, config: PipelineConfig = PipelineConfig(),
                 selector: SelectorState | None = None) -> PipelineState:
    """Fit every preprocessing state from the given (training) rows only.

    ``selector`` overrides the per-call tree fit (global selection scope).
    """
    X1 = np.asarray(X1, dtype=float)
    y = np.asarray(y)
    imp = fit_imputer(X1, "mean")
    A = imp.apply(X1)
    scaler = fit_scaler(A)
    if selector is None:
        selector = fit_tree_selector(scaler.apply(A), y, config.tree)
    n_demo = 0 if X2 is None else int(np.asarray(X2).shape[1])
    demo_imp = demo_scaler = None
    if n_demo:
        demo_imp = fit_imputer(X2, "zero")
        demo_scaler = fit_scaler(demo_imp.apply(X2))
    return PipelineState(imp, scaler, selector, demo_imp, demo_scaler, X1.shape[1], n_demo)


def balance_training(X: np.ndarray, y: np.ndarray, algorithm: str, config: PipelineConfig, seed: int):
    """Return (X, y, class_weights) ready for ``fit``."""
    mode = config.imbalance_for(algorithm)
    if mode == "smote":
        Xb, yb = smote_oversample(X, y, k=config.smote_k, seed=seed)
        return Xb, yb, None
    if mode == "weights" and algorithm != "mlp":
        return X, y, compute_class_weights(y)
    return X, y, None


def fit_final(X1, X2, y, algorithm: str, hp: dict, config: PipelineConfig, seed: int,
              selector: SelectorState | None = None) -> tuple[PipelineState, FittedModel]:
    state = fit_pipeline(X1, X2, y, config, selector)
    X, yb, cw = balance_training(state.transform(X1, X2), np.asarray(y), algorithm, config, seed)
    return state, fit(algorithm, X, yb, hp, cw, seed=seed)


# input variants: name -> (demographics, symptoms)
VARIANTS = {
    "voice": (False, False),
    "voice_demo": (True, False),
    "voice_symptoms": (False, True),
    "voice_demo_symptoms": (True, True),
}


def variant_block(records, variant: str, symptom_columns=()) -> tuple[np.ndarray | None, list[str]]:
    """Raw demographic/symptom block for ``variant`` (None for voice only)."""
    from laryngobench.dataset import demographic_matrix

    if variant not in VARIANTS:
        raise ValueError(f"unknown input variant {variant!r}")
    demo, symptoms = VARIANTS[variant]
    if symptoms and not symptom_columns:
        raise ValueError(f"variant {variant} needs symptom columns")
    X2, names = demographic_matrix(records, demo, tuple(symptom_columns) if symptoms else ())
    return (X2 if names else None), names
