"""Mel-frequency cepstral coefficients and fixed-length standardization."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

from laryngobench.audio import PIPELINE_RATE, Recording


class TooShortError(ValueError):
    pass


@dataclass(frozen=True)
class MfccParams:
    n_coefficients: int = 20
    window_seconds: float = 0.025
    hop_seconds: float = 0.010
    n_fft: int = 512
    n_mels: int = 40
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-10

    def window_samples(self, rate: int) -> int:
        return int(round(self.window_seconds * rate))

    def hop_samples(self, rate: int) -> int:
        return int(round(self.hop_seconds * rate))

    @property
    def silence_c0(self) -> float:
        """Coefficient 0 of a frame whose mel energies all sit at the log floor."""
        floor = np.full((1, self.n_mels), np.log(self.log_floor))
        return float(dct(floor, type=2, norm="ortho", axis=1)[0, 0])


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_mels: int, n_fft: int, rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters, shape ``(n_mels, n_fft // 2 + 1)``, peak weight 1."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / rate)
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.flags.writeable = False
    return fb


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """Frames without centering or padding: ``1 + (N - win) // hop`` rows."""
    if x.size < win:
        raise TooShortError(f"signal of {x.size} samples is shorter than one {win}-sample window")
    n_frames = 1 + (x.size - win) // hop
    return np.lib.stride_tricks.sliding_window_view(x, win)[::hop][:n_frames]


def power_spectrum(x: np.ndarray, win: int, hop: int, n_fft: int) -> np.ndarray:
    frames = frame_signal(x, win, hop) * get_window("hann", win)
    return np.abs(np.fft.rfft(frames, n_fft)) ** 2


def log_mel(rec: Recording, params: MfccParams = MfccParams()) -> np.ndarray:
    """Log mel energies, shape ``(T, n_mels)``."""
    rate = rec.sample_rate
    spec = power_spectrum(rec.samples, params.window_samples(rate), params.hop_samples(rate), params.n_fft)
    fb = mel_filterbank(params.n_mels, params.n_fft, rate, params.fmin, params.fmax)
    return np.log(np.maximum(spec @ fb.T, params.log_floor))


def extract_mfcc(rec: Recording, params: MfccParams = MfccParams()) -> np.ndarray:
    """MFCC matrix of shape ``(n_coefficients, T)``; coefficient 0 is retained."""
    if rec.sample_rate != PIPELINE_RATE:
        raise ValueError(f"MFCC extraction expects {PIPELINE_RATE} Hz input, got {rec.sample_rate}")
    cep = dct(log_mel(rec, params), type=2, norm="ortho", axis=1)[:, : params.n_coefficients]
    return np.ascontiguousarray(cep.T)


def standardize_mfcc(m: np.ndarray, target_frames: int) -> np.ndarray:
    """Trim (keep the head) or zero-pad to ``target_frames`` columns, then flatten row-major."""
    if target_frames < 1:
        raise ValueError("target_frames must be >= 1")
    n_coef, t = m.shape
    out = np.zeros((n_coef, target_frames))
    keep = min(t, target_frames)
    out[:, :keep] = m[:, :keep]
    return out.reshape(-1)


def mfcc_target_frames(matrices) -> int:
    lengths = [m.shape[1] for m in matrices]
    if not lengths:
        raise ValueError("need at least one training MFCC matrix")
    return int(np.floor(np.mean(lengths) + 0.5))


def mfcc_feature_names(n_coefficients: int, target_frames: int) -> list[str]:
    return [f"mfcc{c}_f{t}" for c in range(n_coefficients) for t in range(target_frames)]
