import numpy as np
import pytest

from laryngobench.bundle import (
    BundleCorruptError, BundleVersionError, ModelBundle, bundle_from_text, bundle_to_text, load_bundle, save_bundle,
)
from laryngobench.dataset import PatientRecord
from laryngobench.pipeline import PipelineConfig, fit_final


def records(n, seed):
    rng = np.random.default_rng(seed)
    return [PatientRecord(f"r{i}", f"r{i}.wav", "x", "Male" if rng.random() < 0.5 else "Female",
                          int(rng.integers(20, 90)), symptoms={"smoker": int(rng.random() < 0.3)})
            for i in range(n)]


def make_bundle(algorithm, variant="voice_demo", seed=0):
    rng = np.random.default_rng(seed)
    n = 80
    y = np.array([1] * 20 + [0] * 60)
    X1 = rng.normal(size=(n, 12))
    X1[:, 0] += 2 * y
    X1[rng.random(X1.shape) < 0.03] = np.nan
    recs = records(n, seed)
    X2 = np.column_stack([[r.age for r in recs], [r.sex == "Male" for r in recs]]).astype(float)
    if variant == "voice":
        X2 = None
    hp = {"svm": {"C": 1.0, "kernel": "rbf", "gamma": "scale", "degree": None},
          "logreg": {"penalty": "elasticnet", "C": 1.0, "solver": "saga", "max_iterations": 200, "l1_ratio": 0.5},
          "mlp": {"hidden_layer_sizes": [8], "activation": "relu", "solver": "adam", "learning_rate": None}}[algorithm]
    state, model = fit_final(X1, X2, y, algorithm, hp, PipelineConfig(), seed)
    return ModelBundle("acoustic", variant, algorithm, hp, state, model, None, (), {"model": seed}, ("note",))


@pytest.mark.parametrize("algorithm", ["svm", "logreg", "mlp"])
def test_round_trip_bitwise(tmp_path, algorithm):
    b = make_bundle(algorithm)
    path = tmp_path / "m.lbm"
    save_bundle(b, path)
    b2 = load_bundle(path)
    rng = np.random.default_rng(7)
    X = rng.normal(size=(100, 12))
    X[rng.random(X.shape) < 0.05] = np.nan
    recs = records(100, 8)
    assert np.array_equal(b.score(X, recs), b2.score(X, recs))
    assert np.array_equal(b.predict(X, recs), b2.predict(X, recs))
    assert b2.hyperparams == b.hyperparams and b2.variant == "voice_demo" and b2.notes == ("note",)
    # serialization is canonical: save(load(save(b))) is byte-identical
    assert bundle_to_text(b2) == path.read_text()


def test_voice_only_variant_ignores_records(tmp_path):
    b = make_bundle("logreg", variant="voice")
    save_bundle(b, tmp_path / "v.lbm")
    X = np.random.default_rng(1).normal(size=(5, 12))
    assert np.array_equal(load_bundle(tmp_path / "v.lbm").score(X, records(5, 0)), b.score(X, records(5, 1)))


def test_flipped_byte_is_corrupt(tmp_path):
    text = bundle_to_text(make_bundle("logreg"))
    i = text.index('"algorithm"') + 3
    bad = text[:i] + ("X" if text[i] != "X" else "Y") + text[i + 1:]
    with pytest.raises(BundleCorruptError):
        bundle_from_text(bad)
    (tmp_path / "bin.lbm").write_bytes(b"\xff\xfe\x00garbage")
    with pytest.raises(BundleCorruptError):
        load_bundle(tmp_path / "bin.lbm")
    with pytest.raises(BundleCorruptError):
        bundle_from_text("not a bundle\n{}")


def test_future_version_rejected_before_checksum():
    text = bundle_to_text(make_bundle("svm"))
    header, body = text.split("\n", 1)
    future = header.replace("schema_version=1", "schema_version=2")
    with pytest.raises(BundleVersionError, match="schema_version 2"):
        bundle_from_text(future + "\n" + body + "tampered")


def test_atomic_save_leaves_no_temp_files(tmp_path):
    save_bundle(make_bundle("mlp"), tmp_path / "a.lbm")
    save_bundle(make_bundle("mlp", seed=1), tmp_path / "a.lbm")
    assert [p.name for p in tmp_path.iterdir()] == ["a.lbm"]
