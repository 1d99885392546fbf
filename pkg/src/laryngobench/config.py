"""Run configuration (YAML)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from laryngobench.classifiers import ALGORITHMS
from laryngobench.features.table import FEATURE_SETS
from laryngobench.pipeline import VARIANTS, PipelineConfig
from laryngobench.preprocessing import TreeConfig
from laryngobench.selection import DEFAULT_SEED, GridError, ParamGrid


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    manifest: str
    schema: str | None = None
    audio_root: str | None = None
    embeddings: str | None = None
    acoustic_vectors: str | None = None


@dataclass(frozen=True)
class RunConfig:
    train: DatasetConfig
    label_map: str
    out: str = "run"
    holdout: DatasetConfig | None = None
    external: tuple[DatasetConfig, ...] = ()
    audio_root: str | None = None
    feature_sets: tuple[str, ...] = FEATURE_SETS
    algorithms: tuple[str, ...] = ALGORITHMS
    variants: tuple[str, ...] = tuple(VARIANTS)
    test_fraction: float = 0.33
    seed: int = DEFAULT_SEED
    folds: int = 5
    grid: ParamGrid = field(default_factory=ParamGrid)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    bootstrap_resamples: int = 1000
    timing_files: int = 10
    timing_repeats: int = 5
    jobs: int = 1

    def datasets(self) -> list[DatasetConfig]:
        return [self.train] + ([self.holdout] if self.holdout else []) + list(self.external)

    def audio_root_for(self, ds: DatasetConfig) -> str | None:
        return ds.audio_root or self.audio_root

    def validate(self) -> None:
        for ds in self.datasets():
            for attr in ("manifest", "schema", "embeddings", "acoustic_vectors"):
                p = getattr(ds, attr)
                if p and not Path(p).exists():
                    raise ConfigError(f"dataset {ds.name}: {attr} path {p} does not exist")
            root = self.audio_root_for(ds)
            if root and not Path(root).is_dir():
                raise ConfigError(f"dataset {ds.name}: audio root {root} is not a directory")
        if not Path(self.label_map).exists():
            raise ConfigError(f"label map {self.label_map} does not exist")
        for fs in self.feature_sets:
            if fs not in FEATURE_SETS:
                raise ConfigError(f"unknown feature set {fs!r}")
            if fs == "embedding":
                for ds in self.datasets():
                    if not ds.embeddings:
                        raise ConfigError(f"dataset {ds.name}: the embedding feature set needs 'embeddings'")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown input variant {v!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.bootstrap_resamples < 100:
            raise ConfigError("bootstrap n_resamples must be at least 100")
        if self.jobs < 1 or self.folds < 2 or self.timing_repeats < 1:
            raise ConfigError("jobs, folds and timing_repeats must be positive (folds >= 2)")


def _dataset(d, name: str, base: Path) -> DatasetConfig:
    if isinstance(d, str):
        d = {"manifest": d}
    if not isinstance(d, dict) or "manifest" not in d:
        raise ConfigError(f"dataset {name}: needs a 'manifest' entry")
    known = {f.name for f in fields(DatasetConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"dataset {name}: unknown keys {sorted(unknown)}")
    resolved = {k: (str(base / v) if k != "name" and v is not None else v) for k, v in d.items()}
    resolved.setdefault("name", name)
    return DatasetConfig(**resolved)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config; relative paths resolve against the config's directory."""
    data: dict = {}
    base = Path(".")
    if path:
        base = Path(path).resolve().parent
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_dict(data, base)


def config_from_dict(data: dict, base: Path = Path(".")) -> RunConfig:
    data = dict(data)
    try:
        if "train" not in data or "label_map" not in data:
            raise ConfigError("config needs 'train' and 'label_map'")
        kw: dict = {
            "train": _dataset(data.pop("train"), "train", base),
            "label_map": str(base / data.pop("label_map")),
        }
        if data.get("holdout"):
            kw["holdout"] = _dataset(data.pop("holdout"), "holdout", base)
        data.pop("holdout", None)
        ext = data.pop("external", None) or {}
        if isinstance(ext, dict):
            kw["external"] = tuple(_dataset(v, k, base) for k, v in ext.items())
        else:
            kw["external"] = tuple(_dataset(v, v.get("name", f"external{i}"), base) for i, v in enumerate(ext))
        if "out" in data:
            kw["out"] = str(base / data.pop("out"))
        if data.get("audio_root"):
            kw["audio_root"] = str(base / data.pop("audio_root"))
        data.pop("audio_root", None)
        for key in ("feature_sets", "algorithms", "variants"):
            if key in data:
                v = data.pop(key)
                kw[key] = tuple([v] if isinstance(v, str) else v)
        grid_file = data.pop("grid_file", None)
        grid = data.pop("grid", None)
        if grid_file:
            kw["grid"] = ParamGrid.from_file(base / grid_file)
        elif grid:
            kw["grid"] = ParamGrid.from_overrides(grid)
        pipe = dict(data.pop("pipeline", None) or {})
        tree = TreeConfig(**(pipe.pop("tree", None) or {}))
        kw["pipeline"] = PipelineConfig(tree=tree, **pipe)
        boot = data.pop("bootstrap", None) or {}
        if "n_resamples" in boot:
            kw["bootstrap_resamples"] = int(boot["n_resamples"])
        timing = data.pop("timing", None) or {}
        if "files" in timing:
            kw["timing_files"] = int(timing["files"])
        if "repeats" in timing:
            kw["timing_repeats"] = int(timing["repeats"])
        for key, cast in (("test_fraction", float), ("seed", int), ("folds", int), ("jobs", int)):
            if key in data:
                kw[key] = cast(data.pop(key))
        if data:
            raise ConfigError(f"unknown config keys {sorted(data)}")
        return RunConfig(**kw)
    except (GridError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
