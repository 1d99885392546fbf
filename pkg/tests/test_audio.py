import struct

import numpy as np
import pytest

from laryngobench.audio import (
    DecodeError,
    Recording,
    UnsupportedFormatError,
    decode_wav,
    resample,
    wav_duration,
    write_wav,
)


def write_raw_wav(path, frames: bytes, rate, channels, bits, tag=1):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(frames)) + frames
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def tone(freq, rate, seconds, amp=0.5):
    t = np.arange(int(round(rate * seconds))) / rate
    return amp * np.sin(2 * np.pi * freq * t)


def test_decode_16bit_mono_length(tmp_path):
    path = tmp_path / "a.wav"
    write_wav(path, tone(220, 44_100, 3.0), 44_100)
    rec = decode_wav(path)
    assert rec.sample_rate == 44_100
    assert rec.samples.size == 132_300
    assert rec.duration == pytest.approx(3.0)
    assert wav_duration(path) == pytest.approx(3.0)


def test_decode_stereo_antiphase_is_silent(tmp_path):
    x = (tone(300, 8000, 0.1) * 32767).astype("<i2")
    inter = np.stack([x, -x], axis=1).astype("<i2").tobytes()
    path = tmp_path / "st.wav"
    write_raw_wav(path, inter, 8000, 2, 16)
    assert np.all(decode_wav(path).samples == 0.0)


def test_decode_duration_50k(tmp_path):
    path = tmp_path / "b.wav"
    write_wav(path, tone(150, 50_000, 1.3), 50_000)
    assert abs(decode_wav(path).duration - 1.3) <= 1 / 50_000


@pytest.mark.parametrize("bits", [8, 24, 32])
def test_decode_integer_widths(tmp_path, bits):
    x = tone(200, 8000, 0.05, amp=0.9)
    if bits == 8:
        raw = np.round(x * 127 + 128).astype(np.uint8).tobytes()
    elif bits == 24:
        v = np.round(x * (2**23 - 1)).astype(np.int32)
        raw = b"".join(int(s).to_bytes(3, "little", signed=True) for s in v)
    else:
        raw = np.round(x * (2**31 - 1)).astype("<i4").tobytes()
    path = tmp_path / f"w{bits}.wav"
    write_raw_wav(path, raw, 8000, 1, bits)
    np.testing.assert_allclose(decode_wav(path).samples, x, atol=2.0 / 2**(bits - 1))


def test_decode_float32(tmp_path):
    x = tone(200, 8000, 0.05).astype("<f4")
    path = tmp_path / "f.wav"
    write_raw_wav(path, x.tobytes(), 8000, 1, 32, tag=3)
    np.testing.assert_array_equal(decode_wav(path).samples, x.astype(np.float64))


def test_decode_errors(tmp_path):
    bad = tmp_path / "x.wav"
    bad.write_bytes(b"ID3 not a wav at all")
    with pytest.raises(UnsupportedFormatError):
        decode_wav(bad)
    mp3ish = tmp_path / "c.wav"
    write_raw_wav(mp3ish, b"\x00" * 40, 8000, 1, 16, tag=0x55)
    with pytest.raises(UnsupportedFormatError):
        decode_wav(mp3ish)
    good = tmp_path / "g.wav"
    write_wav(good, tone(100, 8000, 0.2), 8000)
    trunc = tmp_path / "t.wav"
    trunc.write_bytes(good.read_bytes()[:-500])
    with pytest.raises(DecodeError):
        decode_wav(trunc)


def test_resample_length_and_identity():
    rec = Recording(tone(220, 44_100, 3.0), 44_100)
    out = resample(rec, 16_000)
    assert out.samples.size == 48_000 and out.sample_rate == 16_000
    same = resample(out, 16_000)
    assert same.samples is out.samples


def test_resample_tone_spectrum():
    rec = Recording(tone(440, 50_000, 2.0), 50_000)
    out = resample(rec, 16_000).samples
    seg = out[2000:-2000]
    spec = np.abs(np.fft.rfft(seg * np.blackman(seg.size))) ** 2
    freqs = np.fft.rfftfreq(seg.size, 1 / 16_000)
    peak = int(np.argmax(spec))
    assert abs(freqs[peak] - 440) <= 2
    # everything outside the main lobe of the window
    out_band = np.abs(freqs - 440) > 20
    assert 10 * np.log10(spec[out_band].max() / spec[peak]) < -60


def test_resample_round_trip_duration_and_energy():
    x = Recording(tone(300, 44_100, 1.7), 44_100)
    there = resample(x, 16_000)
    back = resample(there, 44_100)
    assert abs(back.duration - x.duration) <= 2 / 44_100
    def rms(v):
        return np.sqrt(np.mean(v[1000:-1000] ** 2))
    for y in (there.samples, back.samples):
        assert abs(20 * np.log10(rms(y) / rms(x.samples))) < 1.0
