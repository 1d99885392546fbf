import json

import pytest

from conftest import write_config
from laryngobench.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def test_train_evaluate_timing_fairness(cohort, tmp_path, capsys):
    tr, ex = cohort["train"], cohort["external"]
    cfg = write_config(cohort, tmp_path / "c.yaml")
    assert run("train", tr["manifest"], "--label-map", tr["label_map"], "--feature-set", "embedding",
               "--vectors", tr["embeddings"], "--algorithm", "logreg", "--variant", "voice_demo",
               "--config", cfg, "--out", tmp_path / "m") == 0
    bundle = tmp_path / "m" / "bundle.lbm"
    assert bundle.exists() and json.loads((tmp_path / "m" / "cv.json").read_text())["algorithm"] == "logreg"
    assert run("evaluate", ex["manifest"], "--label-map", tr["label_map"], "--bundle", bundle,
               "--vectors", ex["embeddings"], "--n-resamples", 100, "--out", tmp_path / "ev") == 0
    ev = json.loads((tmp_path / "ev" / "evaluation.json").read_text())
    assert ev["metrics"]["n"] == 20 and "sex_fisher" in ev["fairness"]
    assert run("timing", ex["manifest"], "--label-map", tr["label_map"], "--bundle", bundle,
               "--vectors", ex["embeddings"], "--files", 2, "--repeats", 2, "--out", tmp_path / "tm") == 0
    assert (tmp_path / "tm" / "timing.csv").exists()
    capsys.readouterr()
    assert run("fairness", ex["manifest"], "--label-map", tr["label_map"], "--bundle", bundle,
               "--vectors", ex["embeddings"], "--supplementary") == 0
    assert "supplementary" in json.loads(capsys.readouterr().out)


def test_split_extract_compare(cohort, tmp_path):
    tr, ex = cohort["train"], cohort["external"]
    assert run("split", tr["manifest"], "--label-map", tr["label_map"], "--out", tmp_path) == 0
    assert (tmp_path / "train.train.csv").exists() and (tmp_path / "train.holdout.csv").exists()
    assert run("extract", tr["manifest"], "--feature-set", "mfcc", "--audio-root", tr["audio_root"],
               "--out", tmp_path) == 0
    assert (tmp_path / "train.mfcc.csv").read_text().startswith("# feature_set=mfcc")
    assert run("compare-datasets", tr["manifest"], ex["manifest"], "--label-map", tr["label_map"],
               "--audio-root", tr["audio_root"], "--out", tmp_path) == 0


@pytest.mark.parametrize("argv", [
    ["benchmark"],
    ["evaluate", "missing.csv", "--bundle", "missing.lbm"],
    ["report", "/nonexistent/run"],
])
def test_input_errors_exit_2(argv):
    assert run(*argv) == 2


def test_bad_config_exit_2(cohort, tmp_path):
    cfg = write_config(cohort, tmp_path / "c.yaml", algorithms=["knn"])
    assert run("benchmark", "--config", cfg) == 2


def test_extract_failure_exit_1(cohort, tmp_path):
    tr = cohort["train"]
    assert run("extract", tr["manifest"], "--feature-set", "mfcc", "--audio-root", tmp_path, "--out", tmp_path) == 1


def test_benchmark_and_report(cohort, tmp_path):
    cfg = write_config(cohort, tmp_path / "c.yaml", variants=["voice"], algorithms=["svm"], out="r")
    assert run("benchmark", "--config", cfg, "--no-timing") == 0
    assert run("report", tmp_path / "r", "--out", tmp_path / "r.md") == 0
    assert "embedding | voice | svm" in (tmp_path / "r.md").read_text()
