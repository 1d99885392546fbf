import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from oracles import pipeline_states_equal
from laryngobench.pipeline import PipelineConfig, fit_pipeline
from laryngobench.preprocessing import TreeConfig
from laryngobench.selection import (
    DEFAULT_GRID, GridError, ParamGrid, canonical_key, fold_states, grid_search, stratified_kfold,
)


def toy(n=120, seed=0, minority=30):
    rng = np.random.default_rng(seed)
    y = np.array([1] * minority + [0] * (n - minority))
    X1 = rng.normal(size=(n, 6))
    X1[:, 2] += 3.0 * y
    X1[rng.random(X1.shape) < 0.05] = np.nan
    X2 = np.column_stack([rng.normal(50, 10, n), rng.integers(0, 2, n).astype(float)])
    return X1, X2, y


# ---------------- folds ----------------

def test_kfold_exact_split():
    y = np.array([1] * 35 + [0] * 100)
    folds = stratified_kfold(y, 5, 0)
    assert [int(((folds == f) & (y == 1)).sum()) for f in range(5)] == [7] * 5


def test_kfold_remainder_spread():
    folds = stratified_kfold(np.zeros(12, int), 5, 3)
    assert sorted(np.bincount(folds, minlength=5).tolist(), reverse=True) == [3, 3, 2, 2, 2]


def test_kfold_deterministic_and_small_class():
    y = np.array([0] * 20 + [1] * 6)
    assert np.array_equal(stratified_kfold(y, 5, 9), stratified_kfold(y, 5, 9))
    with pytest.raises(ValueError):
        stratified_kfold(np.array([0] * 20 + [1] * 4), 5, 0)


@given(st.integers(5, 40), st.integers(5, 40), st.integers(2, 5), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_kfold_balance_property(n0, n1, k, seed):
    y = np.array([0] * n0 + [1] * n1)
    folds = stratified_kfold(y, k, seed)
    for c in (0, 1):
        counts = np.bincount(folds[y == c], minlength=k)
        assert counts.max() - counts.min() <= 1
    sizes = np.bincount(folds, minlength=k)
    assert sizes.max() - sizes.min() <= 1


# ---------------- grid ----------------

def test_default_grid_sizes():
    g = ParamGrid()
    assert len(g.raw_cells("svm")) == 420
    assert len(g.cells("svm")) == 5 + 105 + 35 + 35
    assert len(g.cells("mlp")) == 5 * 2 * (1 + 3)
    assert len(g.cells("logreg")) == 20 + 40 + 100 + 8
    assert "lbfgs" not in DEFAULT_GRID["mlp"]["solver"]


def test_canonical_cells_keep_first_enumerated():
    g = ParamGrid()
    first = g.cells("logreg")[0]
    assert first == {"penalty": "l1", "C": 0.01, "solver": "newton-cg", "max_iterations": 100, "l1_ratio": None}
    keys = [canonical_key("logreg", c) for c in g.cells("logreg")]
    assert len(keys) == len(set(keys))


def test_grid_override_file(tmp_path):
    p = tmp_path / "grid.yaml"
    p.write_text(yaml.safe_dump({"svm": {"C": [1], "kernel": ["rbf"], "gamma": ["scale"]}}))
    g = ParamGrid.from_file(p)
    assert g.cells("svm") == [{"C": 1, "gamma": "scale", "degree": None, "kernel": "rbf"}]
    with pytest.raises(GridError):
        ParamGrid.from_overrides({"svm": {"bogus": [1]}})
    with pytest.raises(GridError):
        ParamGrid.from_overrides({"svm": {"C": []}})


# ---------------- search ----------------

SMALL = {"logreg": {"penalty": ["l1"], "C": [1e-6, 1.0], "solver": ["saga"], "max_iterations": [300],
                    "l1_ratio": [0.5]}}


def test_planted_cell_wins():
    X1, X2, y = toy()
    res = grid_search(X1, None, y, "logreg", ParamGrid.from_overrides(SMALL), seed=1)
    crippled, good = res.cells
    assert crippled.hyperparams["C"] == 1e-6
    assert res.winner_index == 1
    assert good.mean > 0.85 and crippled.mean == pytest.approx(0.5)
    assert res.winner.mean == np.mean(res.winner.fold_scores)
    assert len(res.winner.fold_scores) == 5


def test_single_cell_and_tie_break():
    X1, _, y = toy()
    one = ParamGrid.from_overrides({"logreg": {**SMALL["logreg"], "C": [1.0]}})
    res = grid_search(X1, None, y, "logreg", one, seed=1)
    assert res.winner_index == 0 and res.winner.mean == sum(res.winner.fold_scores) / 5
    # two distinct cells with identical (constant) predictions tie; first wins
    tie = ParamGrid.from_overrides({"logreg": {**SMALL["logreg"], "C": [1e-7, 1e-6]}})
    assert grid_search(X1, None, y, "logreg", tie, seed=1).winner_index == 0


def test_parallel_matches_serial():
    X1, X2, y = toy()
    g = ParamGrid.from_overrides({"svm": {"C": [0.1, 1, 10], "kernel": ["rbf", "linear"], "gamma": ["scale"]}})
    a = grid_search(X1, X2, y, "svm", g, seed=2)
    b = grid_search(X1, X2, y, "svm", g, seed=2, jobs=2)
    assert a.to_dict() == b.to_dict()


def test_mlp_search_uses_smote():
    X1, X2, y = toy()
    g = ParamGrid.from_overrides({"mlp": {"hidden_layer_sizes": [[8]], "activation": ["relu"],
                                          "solver": ["adam"], "learning_rate": ["constant"]}})
    res = grid_search(X1, X2, y, "mlp", g, seed=0)
    assert res.winner.error is None and len(res.winner.fold_scores) == 5


def test_no_leakage_from_validation_rows():
    X1, X2, y = toy(seed=4)
    cfg = PipelineConfig(tree=TreeConfig(max_depth=4))
    folds = stratified_kfold(y, 5, 4)
    base = fold_states(X1, X2, y, folds, cfg)
    rng = np.random.default_rng(0)
    for f in range(5):
        M1, M2 = X1.copy(), X2.copy()
        va = folds == f
        M1[va] = rng.normal(100, 50, size=M1[va].shape)
        M2[va] = rng.normal(-100, 50, size=M2[va].shape)
        assert pipeline_states_equal(base[f], fold_states(M1, M2, y, folds, cfg)[f])


def test_pipeline_transform_shapes():
    X1, X2, y = toy()
    state = fit_pipeline(X1, X2, y)
    out = state.transform(X1, X2)
    assert out.shape == (X1.shape[0], state.selector.selected_indices.size + 2)
    assert np.isfinite(out).all()
    with pytest.raises(ValueError):
        state.transform(X1, None)
