"""Synthetic sustained-vowel cohort for smoke tests and the acceptance suite.

Each speaker is a pulse-train source with per-cycle period jitter and
amplitude shimmer, shaped by a two-pole glottal filter and a one-pole
spectral tilt, passed through five formant resonators tuned to /a/, plus
aspiration noise.  The malignant class gets 30% more jitter and a steeper
tilt.  Demographics are skewed: malignant speakers are older and mostly
male.  Precomputed "embeddings" are a fixed random projection of log-mel
frames, standing in for a pretrained speech model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy import signal

from laryngobench.audio import Recording, resample, write_wav
from laryngobench.features.embeddings import write_embeddings
from laryngobench.features.mfcc import log_mel

FORMANTS_A = ((750.0, 90.0), (1220.0, 110.0), (2600.0, 160.0), (3300.0, 250.0), (3750.0, 300.0))
SYMPTOMS = ("hoarseness", "dysphagia", "smoker", "drinker")
EMBED_DIM = 512
EMBED_HOP_FRAMES = 50  # one embedding frame per 0.5 s of log-mel frames
PATHOLOGY_MALIGNANT = ("Laryngeal cancer", "Dysplasia")
PATHOLOGY_BENIGN = ("Vocal nodules", "Vocal polyp", "Vocal palsy", "Cyst")


@dataclass(frozen=True)
class CohortSpec:
    n: int = 600
    malignant_fraction: float = 0.05
    rate: int = 44_100
    duration: float = 3.0
    jitter_factor: float = 1.3
    tilt_benign: float = 0.55
    tilt_malignant: float = 0.75
    tilt_sd: float = 0.07
    with_symptoms: bool = True
    gain_db: float = 0.0
    noise_db: float = -35.0


def _resonator(f: float, bw: float, rate: int):
    r = np.exp(-np.pi * bw / rate)
    theta = 2 * np.pi * f / rate
    a = [1.0, -2 * r * np.cos(theta), r * r]
    return [sum(a)], a  # unit gain at DC


def synthesize_vowel(rng: np.random.Generator, f0: float, jitter: float, shimmer_db: float, tilt: float,
                     rate: int, duration: float, noise_db: float = -35.0) -> np.ndarray:
    n = int(round(duration * rate))
    periods = []
    total = 0.0
    period0 = rate / f0
    drift = 1.0 + 0.01 * np.sin(np.linspace(0, 2 * np.pi * rng.uniform(0.2, 0.6), 4096))
    k = 0
    while total < n:
        p = period0 * drift[k % drift.size] * (1.0 + jitter * rng.standard_normal())
        periods.append(max(p, 0.5 * period0))
        total += periods[-1]
        k += 1
    marks = np.cumsum(periods)[:-1]
    marks = marks[marks < n - 1]
    amps = 10 ** (shimmer_db * rng.standard_normal(marks.size) / 20.0)
    src = np.zeros(n)
    idx = marks.astype(int)
    frac = marks - idx
    np.add.at(src, idx, amps * (1 - frac))
    np.add.at(src, idx + 1, amps * frac)
    # glottal pulse shape (two real poles) then class-dependent tilt
    glottal_pole = 0.97
    x = signal.lfilter([1.0], [1.0, -2 * glottal_pole, glottal_pole ** 2], src)
    x = signal.lfilter([1.0 - tilt], [1.0, -tilt], x)
    x = x + 10 ** (noise_db / 20.0) * np.std(x) * rng.standard_normal(n)
    for f, bw in FORMANTS_A:
        if f < rate / 2 - bw:
            b, a = _resonator(f * rng.uniform(0.95, 1.05), bw, rate)
            x = signal.lfilter(b, a, x)
    x = signal.lfilter([1.0, -0.95], [1.0], x)  # lip radiation
    # onset/offset ramps
    ramp = int(0.02 * rate)
    env = np.ones(n)
    env[:ramp] = np.linspace(0, 1, ramp)
    env[-ramp:] = np.linspace(1, 0, ramp)
    x *= env
    return 0.5 * x / np.max(np.abs(x))


def embedding_projection(seed: int = 1234, n_mels: int = 40) -> np.ndarray:
    return np.random.default_rng(seed).normal(0, 1.0 / np.sqrt(n_mels), size=(n_mels, EMBED_DIM))


def pseudo_embedding(rec16: Recording, projection: np.ndarray) -> np.ndarray:
    frames = log_mel(rec16)[::EMBED_HOP_FRAMES]  # (T, n_mels)
    frames = (frames - frames.mean()) / 10.0
    return np.tanh(frames @ projection)


def generate_cohort(out_dir, spec: CohortSpec = CohortSpec(), seed: int = 0, name: str = "cohort",
                    id_prefix: str = "p", write_embedding_file: bool = True) -> dict:
    """Write WAVs, a manifest (+ symptom schema), a label map and embeddings.

    Returns the paths written.
    """
    out = Path(out_dir)
    audio_dir = out / "audio" / name
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_mal = int(round(spec.n * spec.malignant_fraction))
    labels = np.array([1] * n_mal + [0] * (spec.n - n_mal))
    labels = labels[rng.permutation(spec.n)]
    projection = embedding_projection()
    rows, embeddings = [], {}
    for i, y in enumerate(labels):
        rid = f"{id_prefix}{i:04d}"
        male = rng.random() < (0.85 if y else 0.4)
        age = int(np.clip(rng.normal(64, 8) if y else rng.normal(45, 13), 18, 95))
        f0 = rng.normal(120, 15) if male else rng.normal(210, 20)
        jitter = rng.uniform(0.004, 0.012) * (spec.jitter_factor if y else 1.0)
        shimmer = rng.uniform(0.2, 0.5)
        tilt = float(np.clip(rng.normal(spec.tilt_malignant if y else spec.tilt_benign, spec.tilt_sd), 0.05, 0.95))
        x = synthesize_vowel(rng, f0, jitter, shimmer, tilt, spec.rate, spec.duration, spec.noise_db)
        x = x * 10 ** (spec.gain_db / 20.0)
        rel = f"{name}/{rid}.wav"
        write_wav(audio_dir / f"{rid}.wav", x, spec.rate)
        if write_embedding_file:
            rec16 = resample(Recording(np.clip(x, -1, 1), spec.rate))
            embeddings[rid] = pseudo_embedding(rec16, projection)
        smoker = rng.random() < (0.7 if y else 0.3)
        drinker = rng.random() < (0.5 if y else 0.35)
        row = {
            "id": rid, "audio_path": rel,
            "pathology": (PATHOLOGY_MALIGNANT if y else PATHOLOGY_BENIGN)[int(rng.integers(0, 2 if y else 4))],
            "sex": "Male" if male else "Female", "age": age,
            "packs_per_day": f"{rng.uniform(0.5, 2.0):.2f}" if (smoker and spec.with_symptoms) else "NA",
            "drinks_per_day": f"{rng.uniform(0.5, 4.0):.2f}" if (drinker and spec.with_symptoms) else "NA",
            "duration": f"{spec.duration:.3f}",
        }
        if spec.with_symptoms:
            row.update(hoarseness=int(rng.random() < (0.8 if y else 0.5)),
                       dysphagia=int(rng.random() < (0.3 if y else 0.1)),
                       smoker=int(smoker), drinker=int(drinker))
        rows.append(row)
    manifest = out / f"{name}.csv"
    with manifest.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    paths = {"manifest": str(manifest), "audio_root": str(out / "audio")}
    if spec.with_symptoms:
        schema = out / f"{name}.schema.yaml"
        schema.write_text(yaml.safe_dump({"symptoms": list(SYMPTOMS)}), encoding="utf-8")
        paths["schema"] = str(schema)
    label_map = out / "labels.txt"
    label_map.write_text("[malignant]\n" + "\n".join(PATHOLOGY_MALIGNANT) + "\n", encoding="utf-8")
    paths["label_map"] = str(label_map)
    if write_embedding_file:
        emb = out / f"{name}.embeddings.txt"
        write_embeddings(emb, embeddings)
        paths["embeddings"] = str(emb)
    return paths


def generate_benchmark_data(out_dir, n: int = 600, n_external: int = 0, seed: int = 0,
                            malignant_fraction: float = 0.05) -> dict:
    """Training cohort plus an optional external cohort without symptom columns
    (different sample rate and recording gain)."""
    paths = {"train": generate_cohort(out_dir, CohortSpec(n=n, malignant_fraction=malignant_fraction), seed=seed, name="train", id_prefix="t")}
    if n_external:
        ext = CohortSpec(n=n_external, malignant_fraction=malignant_fraction, rate=48_000, with_symptoms=False, gain_db=-6.0, noise_db=-30.0)
        paths["external"] = generate_cohort(out_dir, ext, seed=seed + 1, name="external", id_prefix="e")
    return paths
