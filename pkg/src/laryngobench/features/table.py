"""Per-record feature extraction and feature tables.

A feature table holds one row per patient (manifest order) for one feature
set.  Extraction failures do not abort a batch: the row is NaN and the
error is recorded by id.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laryngobench.audio import decode_wav, resample
from laryngobench.features.acoustic import ACOUSTIC_NAMES, extract_acoustic
from laryngobench.features.embeddings import EmbeddingIndex, mean_pool
from laryngobench.features.mfcc import (
    MfccParams,
    extract_mfcc,
    mfcc_feature_names,
    mfcc_target_frames,
    standardize_mfcc,
)

FEATURE_SETS = ("embedding", "acoustic", "mfcc")


@dataclass
class FeatureTable:
    feature_set: str
    ids: list[str]
    X: np.ndarray
    names: list[str]
    target_frames: int | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def rows_for(self, ids) -> np.ndarray:
        pos = {rid: i for i, rid in enumerate(self.ids)}
        return self.X[[pos[r] for r in ids]]


def audio_path(record, audio_root) -> Path:
    return Path(audio_root, record.audio_path) if audio_root else Path(record.audio_path)


def load_recording(record, audio_root):
    return resample(decode_wav(audio_path(record, audio_root)))


def raw_features(record, feature_set: str, audio_root=None, vectors: EmbeddingIndex | None = None,
                 params: MfccParams = MfccParams()) -> np.ndarray:
    """Vector (embedding, acoustic) or unstandardized MFCC matrix for one record.

    With ``vectors`` given, embedding and acoustic rows are read from the
    interchange file instead of being computed from audio.
    """
    if feature_set == "embedding" or (feature_set == "acoustic" and vectors is not None):
        if vectors is None:
            raise ValueError("the embedding feature set needs an embeddings file")
        if record.id not in vectors:
            raise KeyError(f"no precomputed vectors for id {record.id!r}")
        return mean_pool(vectors.load(record.id))
    rec = load_recording(record, audio_root)
    if feature_set == "acoustic":
        return extract_acoustic(rec)
    if feature_set == "mfcc":
        return extract_mfcc(rec, params)
    raise ValueError(f"unknown feature set {feature_set!r}")


def finish(raw: np.ndarray, feature_set: str, target_frames: int | None) -> np.ndarray:
    if feature_set == "mfcc":
        if target_frames is None:
            raise ValueError("MFCC vectors need target_frames")
        return standardize_mfcc(raw, target_frames)
    return np.asarray(raw, dtype=float)


def featurize(record, feature_set: str, audio_root=None, vectors=None, target_frames=None) -> np.ndarray:
    return finish(raw_features(record, feature_set, audio_root, vectors), feature_set, target_frames)


_INDEX_CACHE: dict[str, EmbeddingIndex] = {}


def vector_index(path) -> EmbeddingIndex:
    key = str(Path(path).resolve())
    if key not in _INDEX_CACHE:
        _INDEX_CACHE[key] = EmbeddingIndex(path)
    return _INDEX_CACHE[key]


def _safe_raw(args):
    record, feature_set, audio_root, vectors_path = args
    vectors = vector_index(vectors_path) if vectors_path else None
    try:
        return raw_features(record, feature_set, audio_root, vectors), None
    except Exception as exc:  # one bad file must not sink the batch
        return None, f"{type(exc).__name__}: {exc}"


def feature_names(feature_set: str, width: int, target_frames: int | None = None) -> list[str]:
    if feature_set == "mfcc" and target_frames:
        return mfcc_feature_names(width // target_frames, target_frames)
    if feature_set == "acoustic" and width == len(ACOUSTIC_NAMES):
        return list(ACOUSTIC_NAMES)
    return [f"{feature_set}{j}" for j in range(width)]


def extract_table(records, feature_set: str, audio_root=None, vectors_path=None,
                  target_frames: int | None = None, jobs: int = 1) -> FeatureTable:
    """Extract one feature set for ``records``.

    For MFCC, ``target_frames`` defaults to the rounded mean frame count of
    these records; pass the training value when extracting test sets.
    """
    records = list(records)
    tasks = [(r, feature_set, audio_root, str(vectors_path) if vectors_path else None) for r in records]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_safe_raw, tasks, chunksize=8))
    else:
        results = [_safe_raw(t) for t in tasks]
    errors = {r.id: err for r, (_, err) in zip(records, results) if err}
    good = [raw for raw, err in results if err is None]
    if feature_set == "mfcc" and target_frames is None and good:
        target_frames = mfcc_target_frames(good)
    vectors = [finish(raw, feature_set, target_frames) if err is None else None for raw, err in results]
    width = next((v.size for v in vectors if v is not None), 0)
    X = np.full((len(records), width), np.nan)
    for i, v in enumerate(vectors):
        if v is not None:
            if v.size != width:
                raise ValueError(f"record {records[i].id}: {v.size} features, expected {width}")
            X[i] = v
    return FeatureTable(feature_set, [r.id for r in records], X, feature_names(feature_set, width, target_frames),
                        target_frames if feature_set == "mfcc" else None, errors)


def write_feature_table(path, table: FeatureTable) -> None:
    """Delimited text: ``id`` plus named columns, rows sorted by id, missing as ``NA``."""
    order = sorted(range(len(table.ids)), key=lambda i: table.ids[i])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# feature_set={table.feature_set}")
        if table.target_frames is not None:
            fh.write(f" target_frames={table.target_frames}")
        fh.write("\n")
        w = csv.writer(fh)
        w.writerow(["id", *table.names])
        for i in order:
            w.writerow([table.ids[i], *("NA" if np.isnan(v) else repr(float(v)) for v in table.X[i])])


def read_feature_table(path) -> FeatureTable:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        meta = dict(kv.split("=", 1) for kv in fh.readline().lstrip("#").split())
        reader = csv.reader(fh)
        header = next(reader)
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([np.nan if v == "NA" else float(v) for v in row[1:]])
    X = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    tf = int(meta["target_frames"]) if "target_frames" in meta else None
    return FeatureTable(meta["feature_set"], ids, X, header[1:], tf)
