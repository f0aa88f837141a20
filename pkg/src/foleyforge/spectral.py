"""STFT magnitudes, mel filterbank, multiscale spectral distance, mel-MSE.

The multiscale distance is the reconstruction loss used in training; the
mel-spectrogram MSE is the evaluation metric. Both operate purely on
magnitudes, so phase never affects them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from foleyforge.audio import AudioBuffer

_TINY = 1e-30


@dataclass(frozen=True)
class SpectralConfig:
    fft_sizes: tuple = (2048, 1024, 512, 256, 128)
    mel_bands: int = 128
    sample_rate: int = 44100
    fmin: float = 0.0
    fmax: float = 22050.0
    log_floor: float = 1e-7

    def __post_init__(self):
        for n in self.fft_sizes:
            if n & (n - 1) != 0:
                raise ValueError(f"fft sizes must be powers of two, got {n}")


DEFAULT_CONFIG = SpectralConfig()


def _samples(x) -> np.ndarray:
    if isinstance(x, AudioBuffer):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(x: np.ndarray, fft_size: int, hop: int) -> np.ndarray:
    """Center frames with reflect padding: (T,) -> (frames, fft_size)."""
    pad = fft_size // 2
    if x.shape[0] < 2:
        x = np.pad(x, (0, 2 - x.shape[0]))
    padded = np.pad(x, (pad, pad), mode="reflect")
    n_frames = 1 + (padded.shape[0] - fft_size) // hop
    view = np.lib.stride_tricks.sliding_window_view(padded, fft_size)[::hop]
    return np.ascontiguousarray(view[:n_frames])


def stft_magnitude(buf, fft_size: int, hop: int | None = None) -> np.ndarray:
    """Hann-windowed centered magnitude spectrogram, shape (frames, bins)."""
    if fft_size & (fft_size - 1) != 0:
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    hop = hop or fft_size // 4
    frames = frame_signal(_samples(buf), fft_size, hop)
    return np.abs(np.fft.rfft(frames * hann_window(fft_size), axis=-1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_matrix(
    mel_bands: int, fft_size: int, sample_rate: int, fmin: float = 0.0, fmax: float | None = None
) -> np.ndarray:
    """Triangular mel filterbank, shape (mel_bands, fft_size//2 + 1).

    Rows are nonnegative with positive sums; a filter whose triangle falls
    between FFT bins gets unit weight on its nearest bin instead.
    """
    bins = fft_size // 2 + 1
    if mel_bands > bins:
        raise ValueError(f"mel_bands={mel_bands} exceeds available bins={bins}")
    fmax = fmax if fmax is not None else sample_rate / 2.0
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), mel_bands + 2))
    bin_hz = np.arange(bins) * sample_rate / fft_size
    weights = np.zeros((mel_bands, bins))
    for i in range(mel_bands):
        lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        up = (bin_hz - lo) / max(center - lo, _TINY)
        down = (hi - bin_hz) / max(hi - center, _TINY)
        weights[i] = np.maximum(0.0, np.minimum(up, down))
        if weights[i].sum() <= 0.0:
            weights[i, int(round(center / (sample_rate / fft_size)))] = 1.0
    return weights


def _pad_to_match(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = max(x.shape[0], y.shape[0])
    if x.shape[0] < n:
        x = np.pad(x, (0, n - x.shape[0]))
    if y.shape[0] < n:
        y = np.pad(y, (0, n - y.shape[0]))
    return x, y


def magnitude_distance(sx: np.ndarray, sy: np.ndarray, log_floor: float = 1e-7) -> float:
    """Single-scale distance between two magnitude spectrograms.

    Normalized Frobenius term (by the larger norm, so the distance is
    exactly symmetric) plus mean log-magnitude L1.
    """
    norm = max(np.linalg.norm(sx), np.linalg.norm(sy), _TINY)
    fro = np.linalg.norm(sx - sy) / norm
    logl1 = float(np.mean(np.abs(np.log(sx + log_floor) - np.log(sy + log_floor))))
    return float(fro + logl1)


def multiscale_spectral_distance(x, y, cfg: SpectralConfig = DEFAULT_CONFIG) -> float:
    """Sum over FFT scales of normalized Frobenius + mean log-magnitude L1 distance.

    Depends only on the magnitude spectrograms, so it is phase-blind; zero
    iff the magnitudes match at every scale (both-silent included).
    """
    xs, ys = _pad_to_match(_samples(x), _samples(y))
    total = 0.0
    for fft_size in cfg.fft_sizes:
        sx = stft_magnitude(xs, fft_size)
        sy = stft_magnitude(ys, fft_size)
        total += magnitude_distance(sx, sy, cfg.log_floor)
    return float(total)


def mel_power_db(buf, cfg: SpectralConfig = DEFAULT_CONFIG, fft_size: int = 2048) -> np.ndarray:
    """dB-scaled mel power spectrogram, shape (frames, mel_bands)."""
    mag = stft_magnitude(buf, fft_size, fft_size // 4)
    mel = mel_matrix(cfg.mel_bands, fft_size, cfg.sample_rate, cfg.fmin, cfg.fmax)
    return 10.0 * np.log10(mag**2 @ mel.T + cfg.log_floor)


def mel_mse(x, y, cfg: SpectralConfig = DEFAULT_CONFIG) -> float:
    """Mean squared error between dB mel spectrograms (128 bands, fft 2048, hop 512)."""
    xs, ys = _pad_to_match(_samples(x), _samples(y))
    dx = mel_power_db(xs, cfg)
    dy = mel_power_db(ys, cfg)
    return float(np.mean((dx - dy) ** 2))
