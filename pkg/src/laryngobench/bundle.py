"""Model bundles: everything needed to go from one recording to a prediction.

On disk a bundle is a single header line followed by a JSON body::

    LARYNGOBENCH-BUNDLE schema_version=1 sha256=<hex digest of the body>
    { ... }

Numeric arrays are stored as base64 of their raw little-endian bytes, so a
loaded bundle reproduces predictions bitwise.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from laryngobench.classifiers import FittedModel, predict, score
from laryngobench.pipeline import VARIANTS, PipelineState, variant_block
from laryngobench.preprocessing import ImputerState, ScalerState, SelectorState

SCHEMA_VERSION = 1
MAGIC = "LARYNGOBENCH-BUNDLE"


class BundleError(ValueError):
    pass


class BundleVersionError(BundleError):
    pass


class BundleCorruptError(BundleError):
    pass


@dataclass(frozen=True)
class ModelBundle:
    feature_set: str
    variant: str
    algorithm: str
    hyperparams: dict
    pipeline: PipelineState
    model: FittedModel
    target_frames: int | None = None
    symptom_columns: tuple = ()
    seeds: dict = field(default_factory=dict)
    notes: tuple = ()

    def demographic_block(self, records):
        return variant_block(records, self.variant, self.symptom_columns)[0]

    def inputs(self, X1, records) -> np.ndarray:
        return self.pipeline.transform(X1, self.demographic_block(records))

    def score(self, X1, records) -> np.ndarray:
        return score(self.model, self.inputs(X1, records))

    def predict(self, X1, records) -> np.ndarray:
        return predict(self.model, self.inputs(X1, records))


# ---------------------------------------------------------------- encoding

def _enc(obj):
    if isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        return {"__ndarray__": {"dtype": le.dtype.str, "shape": list(arr.shape),
                                "data": base64.b64encode(le.tobytes()).decode("ascii")}}
    if isinstance(obj, dict):
        return {str(k): _enc(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_enc(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dec(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            spec = obj["__ndarray__"]
            raw = base64.b64decode(spec["data"])
            return np.frombuffer(raw, dtype=np.dtype(spec["dtype"])).reshape(spec["shape"]).copy()
        return {k: _dec(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_dec(v) for v in obj]
    return obj


def _state_dict(p: PipelineState) -> dict:
    return {
        "audio_imputer": {"strategy": p.audio_imputer.strategy, "fill": p.audio_imputer.fill},
        "audio_scaler": {"mean": p.audio_scaler.mean, "std": p.audio_scaler.std},
        "selector": {"selected_indices": p.selector.selected_indices, "importances": p.selector.importances,
                     "threshold": p.selector.threshold, "fallback": p.selector.fallback},
        "demo_imputer": None if p.demo_imputer is None else {"strategy": p.demo_imputer.strategy},
        "demo_scaler": None if p.demo_scaler is None else {"mean": p.demo_scaler.mean, "std": p.demo_scaler.std},
        "n_audio": p.n_audio, "n_demo": p.n_demo,
    }


def _state_from(d: dict) -> PipelineState:
    return PipelineState(
        audio_imputer=ImputerState(d["audio_imputer"]["strategy"], d["audio_imputer"]["fill"]),
        audio_scaler=ScalerState(d["audio_scaler"]["mean"], d["audio_scaler"]["std"]),
        selector=SelectorState(d["selector"]["selected_indices"], d["selector"]["importances"],
                               d["selector"]["threshold"], d["selector"]["fallback"]),
        demo_imputer=None if d["demo_imputer"] is None else ImputerState(d["demo_imputer"]["strategy"]),
        demo_scaler=None if d["demo_scaler"] is None else ScalerState(d["demo_scaler"]["mean"],
                                                                      d["demo_scaler"]["std"]),
        n_audio=int(d["n_audio"]), n_demo=int(d["n_demo"]),
    )


def bundle_to_text(b: ModelBundle) -> str:
    body = {
        "schema_version": SCHEMA_VERSION,
        "feature_set": b.feature_set,
        "input_variant": b.variant,
        "algorithm": b.algorithm,
        "hyperparams": b.hyperparams,
        "target_frames": b.target_frames,
        "symptom_columns": list(b.symptom_columns),
        "seeds": b.seeds,
        "notes": list(b.notes),
        "pipeline": _state_dict(b.pipeline),
        "model": {"algorithm": b.model.algorithm, "hyperparams": b.model.hyperparams,
                  "params": b.model.params, "meta": b.model.meta},
    }
    text = json.dumps(_enc(body), indent=1, sort_keys=True) + "\n"
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return f"{MAGIC} schema_version={SCHEMA_VERSION} sha256={digest}\n{text}"


def bundle_from_text(text: str) -> ModelBundle:
    header, sep, body = text.partition("\n")
    fields = header.split()
    if not sep or not fields or fields[0] != MAGIC:
        raise BundleCorruptError("not a model bundle (bad header)")
    meta = dict(f.split("=", 1) for f in fields[1:] if "=" in f)
    try:
        version = int(meta["schema_version"])
    except (KeyError, ValueError):
        raise BundleCorruptError("bundle header lacks a readable schema_version") from None
    if version != SCHEMA_VERSION:
        raise BundleVersionError(
            f"bundle schema_version {version} is not supported; this build reads schema_version {SCHEMA_VERSION}")
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != meta.get("sha256"):
        raise BundleCorruptError("bundle checksum mismatch; the file is corrupted or was edited")
    try:
        d = _dec(json.loads(body))
        model = FittedModel(d["model"]["algorithm"], d["model"]["hyperparams"], d["model"]["params"],
                            d["model"]["meta"])
        if d["input_variant"] not in VARIANTS:
            raise BundleCorruptError(f"unknown input variant {d['input_variant']!r}")
        return ModelBundle(
            feature_set=d["feature_set"], variant=d["input_variant"], algorithm=d["algorithm"],
            hyperparams=d["hyperparams"], pipeline=_state_from(d["pipeline"]), model=model,
            target_frames=d["target_frames"], symptom_columns=tuple(d["symptom_columns"]),
            seeds=d["seeds"], notes=tuple(d["notes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BundleError):
            raise
        raise BundleCorruptError(f"malformed bundle body: {exc}") from None


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_bundle(b: ModelBundle, path) -> None:
    atomic_write_text(path, bundle_to_text(b))


def load_bundle(path) -> ModelBundle:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise BundleCorruptError(f"{path}: not valid UTF-8") from None
    return bundle_from_text(text)
