"""Audio buffers, WAV I/O, resampling, segmentation and normalization.

Everything downstream works on mono float buffers at a single canonical
rate (44100 Hz); this module is the entry/exit boundary that gets signals
into and out of that shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

CANONICAL_RATE = 44100

# Windowed-sinc resampler: 32 zero crossings per side -> >= 64-tap kernel,
# Kaiser beta 8.6 (~90 dB stopband).
_SINC_HALF_WIDTH = 32
_KAISER_BETA = 8.6
_CUTOFF_ROLLOFF = 0.9475


@dataclass(frozen=True)
class AudioBuffer:
    """Mono sample sequence plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"AudioBuffer wants a 1-D sample array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self) else 0.0


@dataclass(frozen=True)
class SegmentSpec:
    """Windowing policy for cutting long recordings into training segments."""

    segment_seconds: float = 5.0
    min_keep_seconds: float = 1.0
    pad_policy: str = "zero_pad"  # or "drop"

    def __post_init__(self):
        if self.segment_seconds <= 0:
            raise ValueError("segment_seconds must be > 0")
        if self.min_keep_seconds > self.segment_seconds:
            raise ValueError("min_keep_seconds must be <= segment_seconds")
        if self.pad_policy not in ("zero_pad", "drop"):
            raise ValueError(f"unknown pad_policy {self.pad_policy!r}")


def load_wav(path: str | Path) -> AudioBuffer:
    """Load a RIFF/WAVE file (PCM16 or float32, mono or stereo) as mono [-1, 1].

    Stereo is downmixed by averaging the two channels.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such audio file: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except Exception as exc:
        raise ValueError(f"unreadable WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise ValueError(f"zero-length audio: {path}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    else:
        raise ValueError(
            f"unsupported WAV encoding {data.dtype} in {path}; expected 16-bit PCM or 32-bit float"
        )
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise ValueError(f"{path}: {samples.shape[1]} channels; only mono/stereo supported")
        samples = samples.mean(axis=1)
    return AudioBuffer(samples, rate)


def save_wav(buf: AudioBuffer, path: str | Path, bit_depth: str | int = 16) -> None:
    """Write a buffer as 16-bit PCM or IEEE float32 WAV; round trips within format quantization."""
    path = Path(path)
    if bit_depth in (16, "16"):
        quantized = np.clip(np.round(buf.samples * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(str(path), buf.sample_rate, quantized)
    elif bit_depth == "f32":
        wavfile.write(str(path), buf.sample_rate, buf.samples.astype(np.float32))
    else:
        raise ValueError(f"bit_depth must be 16 or 'f32', got {bit_depth!r}")


def _sinc_kernel(offsets: np.ndarray, cutoff: float) -> np.ndarray:
    """Kaiser-windowed sinc taps at (possibly fractional) sample offsets."""
    x = offsets * cutoff
    core = cutoff * np.sinc(x)
    span = _SINC_HALF_WIDTH / cutoff
    u = np.clip(offsets / span, -1.0, 1.0)
    window = np.i0(_KAISER_BETA * np.sqrt(np.maximum(0.0, 1.0 - u * u))) / np.i0(_KAISER_BETA)
    window[np.abs(offsets) > span] = 0.0
    return core * window


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited (windowed-sinc) resampling to target_rate.

    Duration is preserved to within one output sample. Identity when the
    rate already matches.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == buf.sample_rate:
        return buf
    ratio = target_rate / buf.sample_rate
    out_len = max(1, round(len(buf) * ratio))
    cutoff = min(1.0, ratio) * _CUTOFF_ROLLOFF
    support = int(math.ceil(_SINC_HALF_WIDTH / cutoff))
    padded = np.concatenate([np.zeros(support), buf.samples, np.zeros(support + 1)])
    offsets = np.arange(-support, support + 1, dtype=np.float64)

    out = np.empty(out_len, dtype=np.float64)
    block = 32768
    for start in range(0, out_len, block):
        stop = min(start + block, out_len)
        t = np.arange(start, stop, dtype=np.float64) / ratio
        base = np.floor(t).astype(np.int64)
        frac = t - base
        taps = _sinc_kernel(offsets[None, :] - frac[:, None], cutoff)
        taps /= taps.sum(axis=1, keepdims=True)
        idx = base[:, None] + offsets.astype(np.int64)[None, :] + support
        out[start:stop] = np.einsum("ij,ij->i", padded[idx], taps)
    return AudioBuffer(out, target_rate)


def segment(buf: AudioBuffer, spec: SegmentSpec = SegmentSpec()) -> list[AudioBuffer]:
    """Cut a buffer into consecutive non-overlapping fixed-length segments.

    A final remainder at least min_keep_seconds long is zero-padded to full
    length under "zero_pad" and discarded under "drop"; shorter remainders
    are always discarded.
    """
    if len(buf) == 0:
        raise ValueError("cannot segment an empty buffer")
    seg_len = int(round(spec.segment_seconds * buf.sample_rate))
    min_keep = int(round(spec.min_keep_seconds * buf.sample_rate))
    full = len(buf) // seg_len
    out = [
        AudioBuffer(buf.samples[i * seg_len : (i + 1) * seg_len], buf.sample_rate)
        for i in range(full)
    ]
    remainder = len(buf) - full * seg_len
    if remainder >= max(min_keep, 1) and spec.pad_policy == "zero_pad":
        tail = np.zeros(seg_len, dtype=np.float64)
        tail[:remainder] = buf.samples[full * seg_len :]
        out.append(AudioBuffer(tail, buf.sample_rate))
    return out


def peak_normalize(buf: AudioBuffer) -> AudioBuffer:
    """Scale so max |sample| is exactly 1.0; all-zero input is returned unchanged."""
    if len(buf) == 0:
        raise ValueError("cannot normalize an empty buffer")
    peak = buf.peak()
    if peak == 0.0:
        return buf
    return AudioBuffer(buf.samples / peak, buf.sample_rate)
