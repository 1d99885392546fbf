"""Dataset manifests, binary label mapping, stratified splits and dataset comparison.

Manifest: UTF-8 CSV with header.  Required columns ``id, audio_path,
pathology, sex, age``; optional ``packs_per_day, drinks_per_day`` and
``duration`` (seconds).  Symptom columns are declared in a sidecar YAML file
(``symptoms: [col, ...]``), by default ``<manifest stem>.schema.yaml``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from laryngobench.stats import fisher_exact, mann_whitney_u

log = logging.getLogger(__name__)

BENIGN, MALIGNANT = 0, 1
LABEL_NAMES = {BENIGN: "Benign", MALIGNANT: "Malignant"}
REQUIRED_COLUMNS = ("id", "audio_path", "pathology", "sex", "age")
OPTIONAL_NUMERIC = ("packs_per_day", "drinks_per_day")
MISSING_MARKERS = {"", "NA", "NaN", "nan", "N/A"}


class SchemaError(ValueError):
    pass


class RowError(ValueError):
    def __init__(self, row_index: int, message: str):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class StratificationError(ValueError):
    pass


@dataclass(frozen=True)
class PatientRecord:
    id: str
    audio_path: str
    pathology: str
    sex: str  # "Male" | "Female"
    age: int
    label: int | None = None
    symptoms: dict = field(default_factory=dict)
    packs_per_day: float | None = None
    drinks_per_day: float | None = None
    duration: float | None = None


@dataclass(frozen=True)
class LabelMap:
    malignant_names: frozenset = frozenset()

    def __call__(self, pathology: str) -> int:
        return MALIGNANT if pathology in self.malignant_names else BENIGN

    @classmethod
    def from_file(cls, path) -> "LabelMap":
        """Read pathology names listed under a ``[malignant]`` heading, one per line."""
        names, section = set(), None
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                continue
            if section == "malignant":
                names.add(line)
        return cls(frozenset(names))


@dataclass(frozen=True)
class LabeledDataset:
    records: tuple[PatientRecord, ...]
    symptom_columns: tuple[str, ...] = ()
    source: str = ""

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int8)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def has_symptoms(self) -> bool:
        return bool(self.symptom_columns)

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        return replace(self, records=tuple(self.records[i] for i in indices))


def _parse_optional_float(value: str, column: str, row: int) -> float | None:
    if value is None or value.strip() in MISSING_MARKERS:
        return None
    try:
        v = float(value)
    except ValueError:
        raise RowError(row, f"unparseable {column} {value!r}") from None
    return v


def _parse_sex(value: str, row: int) -> str:
    v = value.strip().lower()
    if v in ("m", "male"):
        return "Male"
    if v in ("f", "female"):
        return "Female"
    raise RowError(row, f"unknown sex {value!r}")


def _parse_age(value: str, row: int) -> int:
    try:
        age = float(value)
    except (TypeError, ValueError):
        raise RowError(row, f"unparseable age {value!r}") from None
    if not math.isfinite(age) or age != int(age):
        raise RowError(row, f"unparseable age {value!r}")
    return int(age)


def read_symptom_schema(path) -> tuple[str, ...]:
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    cols = data.get("symptoms", []) if isinstance(data, dict) else data
    return tuple(str(c) for c in cols)


def load_manifest(path, label_map: LabelMap, schema_path=None) -> LabeledDataset:
    path = Path(path)
    if schema_path is None:
        candidate = path.with_name(path.stem + ".schema.yaml")
        schema_path = candidate if candidate.exists() else None
    symptom_cols = read_symptom_schema(schema_path) if schema_path else ()

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in REQUIRED_COLUMNS + symptom_cols:
            if col not in header:
                raise SchemaError(f"{path}: missing required column {col!r}")
        records = []
        for i, row in enumerate(reader):
            age = _parse_age(row["age"], i)
            if age < 18:
                log.warning("%s row %d: age %d is below 18", path, i, age)
            symptoms = {}
            for col in symptom_cols:
                symptoms[col] = _parse_optional_float(row[col], col, i)
            extras = {c: _parse_optional_float(row.get(c), c, i) for c in OPTIONAL_NUMERIC}
            for c, v in extras.items():
                if v is not None and v < 0:
                    raise RowError(i, f"{c} must be non-negative")
            records.append(PatientRecord(
                id=row["id"].strip(),
                audio_path=row["audio_path"].strip(),
                pathology=row["pathology"].strip(),
                sex=_parse_sex(row["sex"], i),
                age=age,
                label=label_map(row["pathology"].strip()),
                symptoms=symptoms,
                duration=_parse_optional_float(row.get("duration"), "duration", i),
                **extras,
            ))
    return LabeledDataset(tuple(records), symptom_cols, str(path))


def write_manifest(path, ds: LabeledDataset) -> None:
    cols = list(REQUIRED_COLUMNS) + list(OPTIONAL_NUMERIC) + ["duration"] + list(ds.symptom_columns)

    def fmt(v):
        return "NA" if v is None else v

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in ds.records:
            w.writerow([r.id, r.audio_path, r.pathology, r.sex, r.age, fmt(r.packs_per_day),
                        fmt(r.drinks_per_day), fmt(r.duration)]
                       + [fmt(r.symptoms.get(c)) for c in ds.symptom_columns])
    if ds.symptom_columns:
        Path(path).with_name(Path(path).stem + ".schema.yaml").write_text(
            yaml.safe_dump({"symptoms": list(ds.symptom_columns)}), encoding="utf-8")


def stratified_split(ds: LabeledDataset, test_fraction: float, seed: int):
    """Per class, ``round(test_fraction * n_c)`` rows (halves rounded up) go to test.

    Both outputs keep the manifest's row order.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    labels = ds.labels
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in (BENIGN, MALIGNANT):
        members = np.flatnonzero(labels == c)
        if members.size < 2:
            raise StratificationError(f"class {LABEL_NAMES[c]} has {members.size} member(s); need >= 2")
        n_test = int(math.floor(test_fraction * members.size + 0.5))
        n_test = min(max(n_test, 1), members.size - 1)
        test_idx.extend(rng.permutation(members)[:n_test].tolist())
    test_set = set(test_idx)
    train = [i for i in range(len(ds)) if i not in test_set]
    return ds.subset(train), ds.subset(sorted(test_set))


def summarize(ds: LabeledDataset) -> dict:
    out: dict = {"n": len(ds), "classes": {}}
    for c, cname in LABEL_NAMES.items():
        per_sex = {}
        for sex in ("Female", "Male"):
            ages = [r.age for r in ds.records if r.label == c and r.sex == sex]
            per_sex[sex] = {"count": len(ages)}
            if ages:
                per_sex[sex].update(min_age=min(ages), mean_age=float(np.mean(ages)), max_age=max(ages))
        out["classes"][cname] = per_sex
    out["prevalence"] = float(ds.labels.mean()) if len(ds) else 0.0
    durations = [r.duration for r in ds.records if r.duration is not None]
    if durations:
        out["duration_seconds"] = {"min": min(durations), "mean": float(np.mean(durations)),
                                   "max": max(durations)}
    return out


def resolve_durations(ds: LabeledDataset, audio_root=None) -> LabeledDataset:
    """Fill missing durations from WAV headers when the audio files can be found."""
    from laryngobench.audio import wav_duration

    recs = []
    for r in ds.records:
        if r.duration is None:
            p = Path(audio_root, r.audio_path) if audio_root else Path(r.audio_path)
            if p.exists():
                r = replace(r, duration=wav_duration(p))
        recs.append(r)
    return replace(ds, records=tuple(recs))


def _not_computable(reason: str) -> dict:
    return {"computable": False, "reason": reason}


def compare_datasets(a: LabeledDataset, b: LabeledDataset) -> dict:
    """Age (Mann-Whitney U) and sex (Fisher exact) per class across datasets, plus
    within-dataset benign-vs-malignant duration tests and prevalences."""
    report: dict = {"age_mwu": {}, "sex_fisher": {}, "duration_mwu": {}, "prevalence": {}}
    for c, cname in LABEL_NAMES.items():
        ra = [r for r in a.records if r.label == c]
        rb = [r for r in b.records if r.label == c]
        if not ra or not rb:
            report["age_mwu"][cname] = _not_computable(f"class {cname} empty in a dataset")
            report["sex_fisher"][cname] = _not_computable(f"class {cname} empty in a dataset")
            continue
        report["age_mwu"][cname] = mann_whitney_u([r.age for r in ra], [r.age for r in rb]).to_dict()
        table = [[sum(r.sex == "Male" for r in ra), sum(r.sex == "Female" for r in ra)],
                 [sum(r.sex == "Male" for r in rb), sum(r.sex == "Female" for r in rb)]]
        report["sex_fisher"][cname] = fisher_exact(table).to_dict()
    for name, ds in (("a", a), ("b", b)):
        key = ds.source or name
        report["prevalence"][key] = float(ds.labels.mean()) if len(ds) else None
        ben = [r.duration for r in ds.records if r.label == BENIGN and r.duration is not None]
        mal = [r.duration for r in ds.records if r.label == MALIGNANT and r.duration is not None]
        if ben and mal:
            report["duration_mwu"][key] = mann_whitney_u(ben, mal).to_dict()
        else:
            report["duration_mwu"][key] = _not_computable("durations unavailable or class empty")
    return report


def demographic_matrix(records: Sequence[PatientRecord], include_demo: bool,
                       symptom_columns: Sequence[str] = ()) -> tuple[np.ndarray, list[str]]:
    """Demographic/symptom block; sex is encoded Female=0, Male=1, missing values NaN."""
    names: list[str] = []
    cols = []
    if include_demo:
        names += ["age", "sex"]
        cols.append([float(r.age) for r in records])
        cols.append([1.0 if r.sex == "Male" else 0.0 for r in records])
    if symptom_columns:
        for c in symptom_columns:
            names.append(c)
            cols.append([np.nan if r.symptoms.get(c) is None else float(r.symptoms[c]) for r in records])
        for c in OPTIONAL_NUMERIC:
            names.append(c)
            cols.append([np.nan if getattr(r, c) is None else float(getattr(r, c)) for r in records])
    if not cols:
        return np.zeros((len(records), 0)), names
    return np.column_stack(cols), names
