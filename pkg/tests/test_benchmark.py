import json

import pytest

from conftest import write_config
from laryngobench.benchmark import BUNDLE_NAME, cell_id, run_benchmark
from laryngobench.bundle import load_bundle
from laryngobench.config import ConfigError, load_config
from laryngobench.report import format_cell, render_report


@pytest.fixture(scope="module")
def full_run(cohort, tmp_path_factory):
    d = tmp_path_factory.mktemp("full")
    cfg = load_config(write_config(cohort, d / "cfg.yaml", feature_sets=["embedding", "acoustic", "mfcc"], out="run"))
    return run_benchmark(cfg)


def test_full_matrix(full_run):
    out, statuses = full_run
    assert len(statuses) == 36
    assert all(s["status"] == "ok" for s in statuses), [s for s in statuses if s["status"] != "ok"]
    ext_reports, skipped = 0, 0
    for s in statuses:
        m = json.loads((out / "cells" / s["cell"] / "metrics.json").read_text())["test_sets"]
        assert "holdout" in m and not m["holdout"].get("skipped")
        if m["ext"].get("skipped"):
            skipped += 1
            assert "symptoms" in s["variant"]
        else:
            ext_reports += 1
            assert set(m["ext"]["metrics"]) == {"balanced_accuracy", "sensitivity", "specificity", "auroc"}
        assert (out / "cells" / s["cell"] / BUNDLE_NAME).exists()
    assert ext_reports == 18 and skipped == 18
    assert not list((out / "cells").glob(".tmp-*"))


def test_run_artifacts(full_run):
    out, statuses = full_run
    for name in ("config.yaml", "split.json", "summary.json", "timing.csv", "timing.json", "report.md"):
        assert (out / name).exists(), name
    split = json.loads((out / "split.json").read_text())
    assert not set(split["train"]) & set(split["holdout"])
    timing = json.loads((out / "timing.json").read_text())
    assert len(timing) == 36
    stages = {t["model_id"]: t["stages"][1] for t in timing}
    assert stages[cell_id("embedding", "voice", "svm")] == "load_pool"
    assert stages[cell_id("mfcc", "voice", "svm")] == "feature_extraction"


def test_bundle_reproduces_reported_metrics(full_run, cohort):
    out, _ = full_run
    b = load_bundle(out / "cells" / cell_id("mfcc", "voice_demo", "logreg") / BUNDLE_NAME)
    assert b.feature_set == "mfcc" and b.variant == "voice_demo" and b.target_frames > 0
    assert b.hyperparams["C"] in (0.1, 1)


def test_report_tables(full_run):
    out, _ = full_run
    text = render_report(out)
    assert "## Classification metrics" in text and "## Fairness" in text and "## Prediction time" in text
    metric_rows = [ln for ln in text.splitlines() if ln.startswith("| embedding") or ln.startswith("| mfcc")
                   or ln.startswith("| acoustic")]
    assert len(metric_rows) >= 36
    assert "**" in text and "ext lacks the symptom columns" in text


def test_single_cell_run(cohort, tmp_path):
    cfg = load_config(write_config(cohort, tmp_path / "c.yaml", out="one", variants=["voice"],
                                   algorithms=["logreg"], external={}))
    out, statuses = run_benchmark(cfg, timing=False)
    assert [s["cell"] for s in statuses] == ["embedding__voice__logreg"]
    assert len(list((out / "cells").glob(f"*/{BUNDLE_NAME}"))) == 1
    table = [ln for ln in render_report(out).split("## Fairness")[0].splitlines() if ln.startswith("| embedding")]
    assert len(table) == 1


def test_format_cell():
    iv = {"point": 0.6914, "ci_low": 0.5932, "ci_high": 0.78449}
    assert format_cell(iv) == "0.691<br>(0.593, 0.784)"
    assert format_cell(iv, bold=True) == "**0.691**<br>(0.593, 0.784)"
    assert format_cell(None) == ""


@pytest.mark.parametrize("extra", [
    {"feature_sets": ["spectrogram"]},
    {"algorithms": ["random_forest"]},
    {"variants": ["voice_video"]},
    {"test_fraction": 1.5},
    {"grid": {"svm": {"bogus": [1]}}},
    {"unknown_key": 1},
    {"bootstrap": {"n_resamples": 10}},
    {"label_map": "does/not/exist.txt"},
])
def test_config_errors(cohort, tmp_path, extra):
    with pytest.raises(ConfigError):
        load_config(write_config(cohort, tmp_path / "bad.yaml", **extra)).validate()


def test_config_paths_resolve_against_config_dir(cohort, tmp_path):
    cfg = load_config(write_config(cohort, tmp_path / "c.yaml", out="rel"))
    assert cfg.out == str(tmp_path / "rel")
    assert cfg.grid.cells("logreg")[0]["C"] == 0.1
