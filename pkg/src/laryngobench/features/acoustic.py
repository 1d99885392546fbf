"""88-slot acoustic descriptor vector for sustained vowels.

A self-contained stand-in for the eGeMAPS parameter set, organised into the
same descriptor families: pitch, perturbation (jitter/shimmer), harmonicity,
formants, spectral balance, loudness and voicing/temporal statistics.

Framing:
  * pitch analysis: 60 ms Hann frames, 10 ms hop, normalised autocorrelation
    (divided by the window's own autocorrelation), F0 search 60-500 Hz;
  * spectral analysis: 25 ms Hann frames, 10 ms hop, 512-point FFT, each frame
    taking the voicing decision of the pitch frame with the nearest centre.

Slots that need voiced frames are NaN when none are found.  ``stddevNorm``
is the coefficient of variation (std / mean).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_toeplitz
from scipy.signal import find_peaks, get_window

from laryngobench.audio import PIPELINE_RATE, Recording
from laryngobench.features.mfcc import MfccParams, extract_mfcc, frame_signal, mel_filterbank

F0_MIN, F0_MAX = 60.0, 500.0
PITCH_WIN, SPEC_WIN, HOP = 0.060, 0.025, 0.010
VOICING_THRESHOLD = 0.45
SILENCE_RMS = 1e-4
LPC_ORDER = 16
_EPS = 1e-12

_CONTOUR = ["amean", "stddevNorm", "percentile20.0", "percentile50.0", "percentile80.0",
            "pctlrange0-2", "meanRisingSlope", "stddevRisingSlope", "meanFallingSlope",
            "stddevFallingSlope"]
_AS = ["amean", "stddevNorm"]


def _build_names() -> tuple[str, ...]:
    names = [f"F0_Hz_{s}" for s in _CONTOUR]
    names += [f"loudness_{s}" for s in _CONTOUR]
    names += [f"spectralFlux_{s}" for s in _AS]
    names += [f"mfcc{k}_{s}" for k in range(1, 5) for s in _AS]
    for d in ("jitterLocal", "shimmerLocaldB", "HNRdBACF", "logRelF0-H1-H2", "logRelF0-H1-A3"):
        names += [f"{d}_{s}" for s in _AS]
    for f in ("F1", "F2"):
        for d in ("frequency", "bandwidth", "amplitudeLogRelF0"):
            names += [f"{f}{d}_{s}" for s in _AS]
    names += ["F3frequency_amean", "F3frequency_stddevNorm", "F3bandwidth_amean",
              "F3bandwidth_stddevNorm", "F3amplitudeLogRelF0_amean", "spectralCentroidV_amean"]
    for d in ("alphaRatioV", "hammarbergIndexV", "slopeV0-500", "slopeV500-1500", "spectralFluxV"):
        names += [f"{d}_{s}" for s in _AS]
    names += [f"mfcc{k}V_{s}" for k in range(1, 5) for s in _AS]
    names += [f"{d}_amean" for d in ("alphaRatioUV", "hammarbergIndexUV", "slopeUV0-500",
                                     "slopeUV500-1500", "spectralFluxUV")]
    names += ["loudnessPeaksPerSec", "VoicedSegmentsPerSec", "MeanVoicedSegmentLengthSec",
              "StddevVoicedSegmentLengthSec", "MeanUnvoicedSegmentLength", "voicedFraction",
              "equivalentSoundLevel_dBp"]
    return tuple(names)


ACOUSTIC_NAMES = _build_names()
assert len(ACOUSTIC_NAMES) == 88


def _mean(v) -> float:
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    return float(v.mean()) if v.size else np.nan


def _cv(v) -> float:
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return np.nan
    m = v.mean()
    if m == 0:
        return 0.0 if v.std() == 0 else np.nan
    return float(v.std() / abs(m))


def _mean_cv(v) -> list[float]:
    return [_mean(v), _cv(v)]


def _contour_stats(values: np.ndarray, segments: list[np.ndarray], hop: float) -> list[float]:
    """Ten functionals of a contour; slopes are taken within contiguous segments."""
    v = values[np.isfinite(values)]
    if v.size == 0:
        return [np.nan] * 10
    p20, p50, p80 = np.percentile(v, [20, 50, 80])
    slopes = np.concatenate([np.diff(values[s]) / hop for s in segments if s.size > 1] or [np.empty(0)])
    rising, falling = slopes[slopes > 0], -slopes[slopes < 0]

    def ms(x):
        return [float(x.mean()), float(x.std())] if x.size else [0.0, 0.0]

    return [float(v.mean()), _cv(v), float(p20), float(p50), float(p80), float(p80 - p20),
            *ms(rising), *ms(falling)]


def _runs(mask: np.ndarray) -> list[np.ndarray]:
    """Index arrays of the contiguous True runs in ``mask``."""
    if not mask.any():
        return []
    idx = np.flatnonzero(mask)
    breaks = np.flatnonzero(np.diff(idx) > 1) + 1
    return np.split(idx, breaks)


def _parabolic(y_m1: float, y0: float, y_p1: float) -> tuple[float, float]:
    denom = y_m1 - 2 * y0 + y_p1
    if denom == 0:
        return 0.0, y0
    shift = 0.5 * (y_m1 - y_p1) / denom
    shift = min(0.5, max(-0.5, shift))
    return shift, y0 - 0.25 * (y_m1 - y_p1) * shift


class _PitchTrack:
    def __init__(self, x: np.ndarray, rate: int):
        self.rate = rate
        self.win = int(round(PITCH_WIN * rate))
        self.hop = int(round(HOP * rate))
        n_frames = 1 + (x.size - self.win) // self.hop if x.size >= self.win else 0
        self.n_frames = n_frames
        self.f0 = np.full(n_frames, np.nan)
        self.r = np.full(n_frames, np.nan)
        if n_frames == 0:
            return
        frames = frame_signal(x, self.win, self.hop)
        frames = frames - frames.mean(axis=1, keepdims=True)
        rms = np.sqrt((frames ** 2).mean(axis=1))
        w = get_window("hann", self.win)
        n_fft = 1 << int(np.ceil(np.log2(2 * self.win)))
        acf = np.fft.irfft(np.abs(np.fft.rfft(frames * w, n_fft)) ** 2, n_fft)[:, : self.win]
        wacf = np.fft.irfft(np.abs(np.fft.rfft(w, n_fft)) ** 2, n_fft)[: self.win]
        lo = int(np.floor(rate / F0_MAX))
        hi = min(int(np.ceil(rate / F0_MIN)), self.win // 2)
        for t in range(n_frames):
            if rms[t] <= SILENCE_RMS or acf[t, 0] <= 0:
                continue
            r = acf[t, : hi + 2] / acf[t, 0] / (wacf[: hi + 2] / wacf[0])
            seg = r[lo: hi + 1]
            peaks = [i for i in range(1, seg.size - 1) if seg[i] >= seg[i - 1] and seg[i] > seg[i + 1]]
            if not peaks:
                continue
            best = max(seg[i] for i in peaks)
            if best < VOICING_THRESHOLD:
                continue
            # earliest strong peak avoids octave-down errors on periodic signals
            i = next(i for i in peaks if seg[i] >= 0.9 * best)
            shift, height = _parabolic(seg[i - 1], seg[i], seg[i + 1])
            self.f0[t] = rate / (lo + i + shift)
            self.r[t] = min(height, 1.0)

    @property
    def voiced(self) -> np.ndarray:
        return np.isfinite(self.f0)

    def centre(self, t) -> np.ndarray:
        return np.asarray(t) * self.hop + self.win / 2.0


def _period_marks(x: np.ndarray, start: int, stop: int, period_at) -> tuple[np.ndarray, np.ndarray]:
    """Peak-picking glottal-cycle marks; returns fractional positions and peak amplitudes."""
    t0 = period_at(start)
    first = start + int(np.argmax(x[start: min(stop, start + int(np.ceil(t0)))]))
    marks, amps = [], []
    m = first
    while True:
        if 0 < m < x.size - 1:
            shift, amp = _parabolic(x[m - 1], x[m], x[m + 1])
            marks.append(m + shift)
            amps.append(amp)
        t0 = period_at(m)
        lo, hi = int(m + 0.8 * t0), int(np.ceil(m + 1.25 * t0))
        if hi >= stop:
            break
        m = lo + int(np.argmax(x[lo: hi + 1]))
    return np.asarray(marks), np.asarray(amps)


def _perturbation(x: np.ndarray, track: _PitchTrack) -> tuple[np.ndarray, np.ndarray]:
    """Per-cycle relative period differences and absolute dB amplitude differences."""
    jit, shim = [], []
    frames = np.arange(track.n_frames)
    centres = track.centre(frames)
    for seg in _runs(track.voiced):
        start = int(seg[0] * track.hop)
        stop = int(seg[-1] * track.hop + track.win)
        f0_c, f0_v = centres[seg], track.f0[seg]

        def period_at(pos, f0_c=f0_c, f0_v=f0_v):
            return track.rate / np.interp(pos, f0_c, f0_v)

        marks, amps = _period_marks(x, start, stop, period_at)
        if marks.size < 3:
            continue
        periods = np.diff(marks)
        ok = (periods >= track.rate / F0_MAX) & (periods <= track.rate / F0_MIN)
        p_prev, p_next = periods[:-1], periods[1:]
        pair_ok = ok[:-1] & ok[1:] & (np.maximum(p_prev, p_next) <= 1.3 * np.minimum(p_prev, p_next))
        if pair_ok.any():
            jit.append(np.abs(p_next - p_prev)[pair_ok] / periods[ok].mean())
        a_prev, a_next = amps[:-1], amps[1:]
        amp_ok = (a_prev > 0) & (a_next > 0)
        if amp_ok.any():
            shim.append(np.abs(20 * np.log10(a_next[amp_ok] / a_prev[amp_ok])))
    cat = lambda parts: np.concatenate(parts) if parts else np.empty(0)  # noqa: E731
    return cat(jit), cat(shim)


def _lpc_formants(frame: np.ndarray, rate: int) -> list[tuple[float, float]]:
    y = np.append(frame[0], frame[1:] - 0.97 * frame[:-1]) * np.hamming(frame.size)
    r = np.correlate(y, y, "full")[y.size - 1: y.size + LPC_ORDER]
    if r[0] <= 0:
        return []
    r = r.copy()
    r[0] *= 1.0 + 1e-9
    try:
        a = solve_toeplitz(r[:-1], -r[1:])
    except np.linalg.LinAlgError:
        return []
    roots = np.roots(np.concatenate(([1.0], a)))
    roots = roots[np.imag(roots) > 0]
    freqs = np.angle(roots) * rate / (2 * np.pi)
    bws = -np.log(np.abs(roots)) * rate / np.pi
    keep = (freqs > 90) & (freqs < rate / 2 - 200) & (bws < 600)
    return sorted(zip(freqs[keep], bws[keep]))


def _harmonic_db(mag_db: np.ndarray, freqs: np.ndarray, target: float, f0: float) -> float:
    band = (freqs >= target - 0.1 * f0) & (freqs <= target + 0.1 * f0)
    return float(mag_db[band].max()) if band.any() else np.nan


def _voice_quality(x: np.ndarray, track: _PitchTrack) -> dict[str, list[float]]:
    out = {k: [] for k in ("h1h2", "h1a3", "F1f", "F1b", "F1a", "F2f", "F2b", "F2a", "F3f", "F3b", "F3a")}
    voiced = np.flatnonzero(track.voiced)
    if voiced.size == 0:
        return out
    n_fft = 4096
    w = get_window("hann", track.win)
    freqs = np.fft.rfftfreq(n_fft, 1.0 / track.rate)
    frames = frame_signal(x, track.win, track.hop)[voiced]
    spectra = 20 * np.log10(np.abs(np.fft.rfft(frames * w, n_fft)) + _EPS)
    for frame, mag_db, f0 in zip(frames, spectra, track.f0[voiced]):
        h1 = _harmonic_db(mag_db, freqs, f0, f0)
        h2 = _harmonic_db(mag_db, freqs, 2 * f0, f0)
        formants = _lpc_formants(frame, track.rate)
        out["h1h2"].append(h1 - h2)
        for k in range(3):
            name = f"F{k + 1}"
            if k < len(formants):
                f, b = formants[k]
                amp = _harmonic_db(mag_db, freqs, max(1, round(f / f0)) * f0, f0) - h1
                out[name + "f"].append(f)
                out[name + "b"].append(b)
                out[name + "a"].append(amp)
                if k == 2:
                    out["h1a3"].append(-amp)
            else:
                for s in "fba":
                    out[name + s].append(np.nan)
                if k == 2:
                    out["h1a3"].append(np.nan)
    return out


def _band_slope(power_db: np.ndarray, freqs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    band = (freqs >= lo) & (freqs <= hi)
    f = freqs[band] - freqs[band].mean()
    return (power_db[:, band] - power_db[:, band].mean(axis=1, keepdims=True)) @ f / (f @ f)


def extract_acoustic(rec: Recording) -> np.ndarray:
    """Compute the 88-slot vector (ordered as ``ACOUSTIC_NAMES``); NaN marks missing slots."""
    if rec.sample_rate != PIPELINE_RATE:
        raise ValueError(f"acoustic extraction expects {PIPELINE_RATE} Hz input, got {rec.sample_rate}")
    x = np.asarray(rec.samples, dtype=float)
    rate = rec.sample_rate
    duration = max(rec.duration, _EPS)
    track = _PitchTrack(x, rate)

    # spectral frames
    win, hop, n_fft = int(round(SPEC_WIN * rate)), int(round(HOP * rate)), 512
    if x.size >= win:
        frames = frame_signal(x, win, hop) * get_window("hann", win)
        power = np.abs(np.fft.rfft(frames, n_fft)) ** 2
        mfcc = extract_mfcc(rec, MfccParams()).T[:, 1:5]
    else:
        power = np.zeros((0, n_fft // 2 + 1))
        mfcc = np.zeros((0, 4))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / rate)
    n_spec = power.shape[0]
    spec_centres = np.arange(n_spec) * hop + win / 2.0
    if track.n_frames:
        nearest = np.clip(np.round((spec_centres - track.win / 2.0) / hop).astype(int), 0, track.n_frames - 1)
        in_range = (spec_centres >= track.win / 2.0 - hop) & (spec_centres <= track.centre(track.n_frames - 1) + hop)
        spec_voiced = track.voiced[nearest] & in_range
    else:
        spec_voiced = np.zeros(n_spec, dtype=bool)

    fb = mel_filterbank(40, n_fft, rate, 0.0, 8000.0)
    loudness = ((power @ fb.T) ** 0.3).sum(axis=1)
    mags = np.sqrt(power)
    sums = mags.sum(axis=1, keepdims=True)
    norm = np.divide(mags, sums, out=np.zeros_like(mags), where=sums > 0)
    flux = np.concatenate(([0.0], ((norm[1:] - norm[:-1]) ** 2).sum(axis=1))) if n_spec else np.empty(0)

    def band_energy(lo, hi):
        band = (freqs >= lo) & (freqs < hi)
        return power[:, band].sum(axis=1)

    def band_max(lo, hi):
        band = (freqs >= lo) & (freqs < hi)
        return power[:, band].max(axis=1) if n_spec else np.empty(0)

    alpha = 10 * np.log10((band_energy(50, 1000) + _EPS) / (band_energy(1000, 5000) + _EPS))
    hammarberg = 10 * np.log10((band_max(0, 2000) + _EPS) / (band_max(2000, 5000) + _EPS))
    power_db = 10 * np.log10(power + _EPS)
    slope_lo = _band_slope(power_db, freqs, 0, 500)
    slope_hi = _band_slope(power_db, freqs, 500, 1500)
    centroid = np.divide(power @ freqs, power.sum(axis=1), out=np.full(n_spec, np.nan),
                         where=power.sum(axis=1) > 0)

    v, uv = spec_voiced, ~spec_voiced
    voiced_runs = _runs(track.voiced)
    unvoiced_runs = _runs(~track.voiced)
    jit, shim = _perturbation(x, track)
    vq = _voice_quality(x, track)
    hnr = 10 * np.log10(np.clip(track.r, 1e-6, 1 - 1e-6) / (1 - np.clip(track.r, 1e-6, 1 - 1e-6)))

    vals: list[float] = []
    vals += _contour_stats(track.f0, voiced_runs, HOP)
    vals += _contour_stats(loudness, [np.arange(n_spec)], HOP) if n_spec else [np.nan] * 10
    vals += _mean_cv(flux)
    for k in range(4):
        vals += _mean_cv(mfcc[:, k])
    vals += _mean_cv(jit) if jit.size else [np.nan, np.nan]
    vals += _mean_cv(shim) if shim.size else [np.nan, np.nan]
    vals += _mean_cv(hnr)
    vals += _mean_cv(vq["h1h2"])
    vals += _mean_cv(vq["h1a3"])
    for f in ("F1", "F2"):
        for s in "fba":
            vals += _mean_cv(vq[f + s])
    vals += _mean_cv(vq["F3f"]) + _mean_cv(vq["F3b"]) + [_mean(vq["F3a"]), _mean(centroid[v])]
    for d in (alpha, hammarberg, slope_lo, slope_hi, flux):
        vals += _mean_cv(d[v])
    for k in range(4):
        vals += _mean_cv(mfcc[v, k])
    for d in (alpha, hammarberg, slope_lo, slope_hi, flux):
        vals.append(_mean(d[uv]))

    if n_spec and loudness.max() > 0:
        peaks, _ = find_peaks(loudness, prominence=0.05 * loudness.max())
        peaks_per_sec = peaks.size / duration
    else:
        peaks_per_sec = 0.0
    voiced_len = np.array([r.size for r in voiced_runs]) * HOP
    unvoiced_len = np.array([r.size for r in unvoiced_runs]) * HOP
    vals += [
        peaks_per_sec,
        len(voiced_runs) / duration,
        float(voiced_len.mean()) if voiced_len.size else np.nan,
        float(voiced_len.std()) if voiced_len.size else np.nan,
        float(unvoiced_len.mean()) if unvoiced_len.size else 0.0,
        float(track.voiced.mean()) if track.n_frames else 0.0,
        float(10 * np.log10(np.mean(x ** 2) + _EPS)) if x.size else np.nan,
    ]
    out = np.asarray(vals, dtype=float)
    assert out.size == 88
    return out
