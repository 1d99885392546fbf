import csv
import dataclasses

import numpy as np
import pytest

from laryngobench import timing
from laryngobench.bundle import ModelBundle
from laryngobench.dataset import LabelMap, load_manifest
from laryngobench.features.table import extract_table
from laryngobench.pipeline import PipelineConfig, fit_final
from laryngobench.timing import time_model, write_timing_csv

HP = {"penalty": "l2", "C": 1.0, "solver": "lbfgs", "max_iterations": 100, "l1_ratio": None}


def trained(cohort, feature_set, vectors=None):
    tr = cohort["train"]
    ds = load_manifest(tr["manifest"], LabelMap.from_file(tr["label_map"]), tr["schema"])
    table = extract_table(ds.records, feature_set, tr["audio_root"], vectors)
    state, model = fit_final(table.X, None, ds.labels, "logreg", HP, PipelineConfig(), 0)
    return ModelBundle(feature_set, "voice", "logreg", HP, state, model, table.target_frames), ds


def test_stages_and_medians(cohort):
    bundle, ds = trained(cohort, "mfcc")
    rep = time_model(bundle, ds.records[:3], "m", repeats=5, audio_root=cohort["train"]["audio_root"])
    assert rep.stage_names() == ("end_to_end", "feature_extraction", "predict_only")
    assert not rep.errors and rep.consistent
    for fid, stages in rep.raw.items():
        assert all(len(v) == 5 for v in stages.values())
        for e2e, feat, pred in zip(stages["end_to_end"], stages["feature_extraction"], stages["predict_only"]):
            assert e2e >= feat and e2e >= pred
        assert rep.medians()[fid]["end_to_end"] == float(np.median(stages["end_to_end"]))
    s = rep.summary()["end_to_end"]
    assert s["min"] <= s["median"] <= s["p95"] <= s["max"] and s["n_files"] == 3


def test_precomputed_vectors_report_load_pool(cohort):
    tr = cohort["train"]
    bundle, ds = trained(cohort, "embedding", tr["embeddings"])
    rep = time_model(bundle, ds.records[:2], "e", repeats=2, vectors_path=tr["embeddings"])
    assert rep.feature_stage == "load_pool"
    assert set(rep.raw[ds.records[0].id]) == {"end_to_end", "load_pool", "predict_only"}


def test_unreadable_file_recorded_and_run_continues(cohort, tmp_path):
    bundle, ds = trained(cohort, "mfcc")
    broken = dataclasses.replace(ds.records[0], id="broken", audio_path="missing.wav")
    rep = time_model(bundle, [broken, *ds.records[:2]], "m", repeats=1, audio_root=cohort["train"]["audio_root"])
    assert "broken" in rep.errors and len(rep.raw) == 2
    write_timing_csv(tmp_path / "t.csv", [rep])
    rows = [r for r in csv.reader(open(tmp_path / "t.csv")) if r and not r[0].startswith("#")]
    assert rows[0] == ["model_id", "file_id", "stage", "seconds"]
    assert len(rows) == 1 + 2 * 3


def test_concurrent_timing_refused(cohort):
    bundle, ds = trained(cohort, "mfcc")
    timing._TIMING_LOCK.acquire()
    try:
        with pytest.raises(RuntimeError):
            time_model(bundle, ds.records[:1], "m", audio_root=cohort["train"]["audio_root"])
    finally:
        timing._TIMING_LOCK.release()
    with pytest.raises(ValueError):
        time_model(bundle, ds.records[:1], "m", repeats=0)
