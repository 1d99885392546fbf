"""Prediction latency per audio file.

For every file one pass is timed with ``time.perf_counter`` at four points:
start, features ready, model input ready, prediction ready.  So

    end_to_end         = decode + resample + features + preprocessing + predict
    feature_extraction = decode + resample + features
                         (``load_pool`` for precomputed-embedding models)
    predict_only       = classifier scoring on the prepared input

and end_to_end >= feature_extraction + predict_only holds per pass.
"""

from __future__ import annotations

import csv
import os
import platform
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laryngobench.classifiers import predict
from laryngobench.features.table import featurize, vector_index

STAGES = ("end_to_end", "feature_extraction", "predict_only")

# timed runs must not overlap with other work in this process
_TIMING_LOCK = threading.Lock()


def cpu_description() -> str:
    name = platform.processor() or platform.machine()
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.startswith("model name"):
                name = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return f"{name}; {os.cpu_count()} logical CPUs; {platform.system()} {platform.release()}; " \
           f"Python {platform.python_version()}"


def feature_stage_name(feature_set: str, uses_vectors: bool) -> str:
    return "load_pool" if uses_vectors else "feature_extraction"


@dataclass
class TimingReport:
    model_id: str
    feature_stage: str
    repeats: int
    raw: dict = field(default_factory=dict)       # file_id -> stage -> [seconds]
    predictions: dict = field(default_factory=dict)  # file_id -> label
    errors: dict = field(default_factory=dict)     # file_id -> message
    consistent: bool = True
    environment: str = ""

    def stage_names(self) -> tuple[str, ...]:
        return ("end_to_end", self.feature_stage, "predict_only")

    def medians(self) -> dict:
        return {fid: {s: float(np.median(v)) for s, v in stages.items()} for fid, stages in self.raw.items()}

    def summary(self) -> dict:
        med = self.medians()
        out = {}
        for s in self.stage_names():
            vals = np.array([m[s] for m in med.values()])
            if vals.size == 0:
                out[s] = None
                continue
            out[s] = {"min": float(vals.min()), "median": float(np.median(vals)),
                      "p95": float(np.percentile(vals, 95)), "max": float(vals.max()), "n_files": int(vals.size)}
        return out

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "repeats": self.repeats, "stages": list(self.stage_names()),
                "environment": self.environment, "summary": self.summary(), "raw": self.raw,
                "errors": self.errors, "predictions_consistent": self.consistent}

    def csv_rows(self) -> list[tuple]:
        return [(self.model_id, fid, s, f"{v:.9f}") for fid, m in sorted(self.medians().items())
                for s, v in m.items()]


def _one_pass(bundle, record, audio_root, vectors):
    t0 = time.perf_counter()
    x1 = featurize(record, bundle.feature_set, audio_root, vectors, bundle.target_frames)
    t1 = time.perf_counter()
    X = bundle.inputs(x1[None, :], [record])
    t2 = time.perf_counter()
    label = int(predict(bundle.model, X)[0])
    t3 = time.perf_counter()
    return label, t3 - t0, t1 - t0, t3 - t2


def time_model(bundle, records, model_id: str, repeats: int = 5, audio_root=None, vectors_path=None) -> TimingReport:
    """Time ``repeats`` passes per file after one excluded warm-up pass.

    Unreadable files get an error entry and the run continues.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if not _TIMING_LOCK.acquire(blocking=False):
        raise RuntimeError("another timing run is active in this process")
    try:
        vectors = vector_index(vectors_path) if vectors_path else None
        report = TimingReport(model_id, feature_stage_name(bundle.feature_set, vectors is not None), repeats,
                              environment=cpu_description())
        warmed = False
        for record in records:
            try:
                if not warmed:
                    _one_pass(bundle, record, audio_root, vectors)
                    warmed = True
                runs = [_one_pass(bundle, record, audio_root, vectors) for _ in range(repeats)]
            except Exception as exc:
                report.errors[record.id] = f"{type(exc).__name__}: {exc}"
                continue
            labels = {r[0] for r in runs}
            report.consistent &= len(labels) == 1
            report.predictions[record.id] = runs[0][0]
            report.raw[record.id] = {
                "end_to_end": [r[1] for r in runs],
                report.feature_stage: [r[2] for r in runs],
                "predict_only": [r[3] for r in runs],
            }
        return report
    finally:
        _TIMING_LOCK.release()


def write_timing_csv(path, reports) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model_id", "file_id", "stage", "seconds"])
        for rep in reports:
            w.writerows(rep.csv_rows())
        fh.write("\n# summary: model_id,stage,min,median,p95,max\n")
        for rep in reports:
            for stage, s in rep.summary().items():
                if s:
                    fh.write(f"# {rep.model_id},{stage},{s['min']:.6f},{s['median']:.6f},"
                             f"{s['p95']:.6f},{s['max']:.6f}\n")
