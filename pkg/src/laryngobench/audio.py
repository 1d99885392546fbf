"""WAV decoding and band-limited resampling."""

from __future__ import annotations

import math
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

PIPELINE_RATE = 16_000

_PCM = 0x0001
_IEEE_FLOAT = 0x0003
_EXTENSIBLE = 0xFFFE


class UnsupportedFormatError(ValueError):
    pass


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class Recording:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if np.ndim(self.samples) != 1:
            raise ValueError("Recording holds mono samples only")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _read_chunks(data: bytes, path) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnsupportedFormatError(f"{path}: not a RIFF/WAVE file")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            if cid == b"data":
                raise DecodeError(f"{path}: truncated data chunk ({len(body)} of {size} bytes)")
            break
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def decode_wav(path) -> Recording:
    """Decode a PCM (8/16/24/32-bit int) or 32/64-bit float WAV file to mono in [-1, 1]."""
    path = Path(path)
    data = path.read_bytes()
    chunks = _read_chunks(data, path)
    if b"fmt " not in chunks:
        raise DecodeError(f"{path}: missing fmt chunk")
    if b"data" not in chunks:
        raise DecodeError(f"{path}: missing data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise DecodeError(f"{path}: fmt chunk too short")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _EXTENSIBLE and len(fmt) >= 26:
        tag = struct.unpack("<H", fmt[24:26])[0]
    if tag not in (_PCM, _IEEE_FLOAT):
        raise UnsupportedFormatError(f"{path}: compressed or unknown codec (format tag {tag:#06x})")
    if channels < 1 or rate <= 0:
        raise DecodeError(f"{path}: invalid header ({channels} channels, {rate} Hz)")
    width = bits // 8
    if block_align != width * channels:
        raise DecodeError(f"{path}: inconsistent block alignment")

    raw = chunks[b"data"]
    n_frames = len(raw) // block_align
    raw = raw[: n_frames * block_align]

    if tag == _IEEE_FLOAT:
        if bits not in (32, 64):
            raise UnsupportedFormatError(f"{path}: {bits}-bit float")
        x = np.frombuffer(raw, dtype=f"<f{width}").astype(np.float64)
    elif bits == 8:
        x = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    elif bits == 32:
        x = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    else:
        raise UnsupportedFormatError(f"{path}: {bits}-bit PCM")

    x = x.reshape(-1, channels).mean(axis=1)
    return Recording(np.clip(x, -1.0, 1.0), int(rate))


def wav_duration(path) -> float:
    """Duration in seconds read from the header only."""
    with open(path, "rb") as fh:
        head = fh.read(4096)
    if head[:4] != b"RIFF" or head[8:12] != b"WAVE" or head[12:16] != b"fmt ":
        return decode_wav(path).duration
    tag, channels, rate, _, block_align, _ = struct.unpack("<HHIIHH", head[20:36])
    pos = 12
    while pos + 8 <= len(head):
        cid, size = struct.unpack("<4sI", head[pos:pos + 8])
        if cid == b"data":
            return size / block_align / rate
        pos += 8 + size + (size & 1)
    return decode_wav(path).duration


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono 16-bit PCM."""
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())


def design_resampler(up: int, down: int, zero_crossings: int = 32, beta: float = 8.6,
                     rolloff: float = 0.95) -> np.ndarray:
    """Kaiser-windowed sinc prototype for polyphase resampling by ``up/down``.

    The filter spans ``zero_crossings`` sinc lobes on each side of the centre
    at the cutoff of the lower of the two rates, i.e. 64 taps per phase.
    ``rolloff`` places the cutoff just below the lower Nyquist frequency so the
    transition band does not alias.
    """
    factor = max(up, down)
    half = zero_crossings * factor
    n = np.arange(-half, half + 1)
    cutoff = rolloff / factor  # fraction of the upsampled Nyquist
    h = cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half + 1, beta)
    # unit DC gain; resample_poly applies the factor ``up`` itself
    return h / h.sum()


def resample(rec: Recording, target_rate: int = PIPELINE_RATE) -> Recording:
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == rec.sample_rate:
        return rec
    g = math.gcd(int(rec.sample_rate), int(target_rate))
    up, down = int(target_rate) // g, int(rec.sample_rate) // g
    h = design_resampler(up, down)
    y = signal.resample_poly(rec.samples, up, down, window=h)
    return Recording(y, int(target_rate))
