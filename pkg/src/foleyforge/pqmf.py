"""Pseudo-QMF polyphase filter bank.

Splits a waveform into B downsampled subband signals and reconstructs it
with near-perfect fidelity (round-trip SNR >= 60 dB at a fixed delay of
L - 1 samples, L = prototype length). The cosine-modulated bank is built
from a Kaiser-windowed lowpass prototype whose cutoff is tuned by
golden-section search on round-trip error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from foleyforge import autodiff as ad
from foleyforge.audio import AudioBuffer

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PqmfBank:
    """Immutable filter bank: B bands, symmetric FIR prototype, modulated filters."""

    bands: int
    attenuation_db: float
    prototype: np.ndarray  # (L,), DC gain 1/B
    analysis_filters: np.ndarray  # (B, L) cosine-modulated analysis bank

    @property
    def taps(self) -> int:
        return self.prototype.shape[0]

    @property
    def delay(self) -> int:
        """Fixed analysis+synthesis delay in samples."""
        return self.taps - 1

    # Frames are dotted with time-reversed filters (causal convolution).
    @property
    def reversed_filters(self) -> np.ndarray:
        return self.analysis_filters[:, ::-1]

    def to_dict(self) -> dict:
        return {
            "bands": self.bands,
            "attenuation_db": self.attenuation_db,
            "prototype": self.prototype.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PqmfBank":
        prototype = np.asarray(payload["prototype"], dtype=np.float64)
        return cls(
            bands=int(payload["bands"]),
            attenuation_db=float(payload["attenuation_db"]),
            prototype=prototype,
            analysis_filters=_modulate(prototype, int(payload["bands"])),
        )


def _kaiser_beta(attenuation_db: float) -> float:
    a = attenuation_db
    if a > 50:
        return 0.1102 * (a - 8.7)
    if a >= 21:
        return 0.5842 * (a - 21) ** 0.4 + 0.07886 * (a - 21)
    return 0.0


def _lowpass(length: int, cutoff: float, beta: float) -> np.ndarray:
    n = np.arange(length) - (length - 1) / 2.0
    ideal = (cutoff / np.pi) * np.sinc((cutoff / np.pi) * n)
    return ideal * np.kaiser(length, beta)


def _modulate(prototype: np.ndarray, bands: int) -> np.ndarray:
    """Cosine-modulate the prototype into B analysis filters.

    The 2*B^(3/2) factor makes the downsampled bank energy-preserving when
    the prototype has DC gain 1/B.
    """
    length = prototype.shape[0]
    n = np.arange(length) - (length - 1) / 2.0
    k = np.arange(bands)[:, None]
    phase = (2 * k + 1) * (np.pi / (2 * bands)) * n[None, :]
    quadrature = ((-1.0) ** k) * (np.pi / 4.0)
    gain = 2.0 * bands ** 1.5
    return gain * prototype[None, :] * np.cos(phase + quadrature)


def _roundtrip_error(bank: PqmfBank, probe: np.ndarray) -> float:
    out = pqmf_synthesize(bank, pqmf_analyze(bank, probe))
    d = bank.delay
    aligned = out[d:]
    ref = probe[: aligned.shape[0]]
    return float(np.sum((aligned - ref) ** 2) / np.sum(ref**2))


def _golden_min(objective, lo: float, hi: float, iters: int = 30) -> float:
    a = hi - _GOLDEN * (hi - lo)
    b = lo + _GOLDEN * (hi - lo)
    fa, fb = objective(a), objective(b)
    for _ in range(iters):
        if fa < fb:
            hi, b, fb = b, a, fa
            a = hi - _GOLDEN * (hi - lo)
            fa = objective(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + _GOLDEN * (hi - lo)
            fb = objective(b)
    return a if fa < fb else b


def design_prototype(bands: int, attenuation_db: float = 100.0) -> PqmfBank:
    """Design the Kaiser prototype, tuning cutoff and window shape on round-trip error.

    The length comes from the Kaiser order estimate for the target attenuation
    over a half-band transition, padded 1.5x (the alias-cancellation error
    floor, not the stopband, limits this family around 64 dB).
    """
    if bands < 2 or bands & (bands - 1) != 0:
        raise ValueError(f"bands must be a power of two >= 2, got {bands}")
    transition = np.pi / (2 * bands)
    estimate = int(np.ceil(1.5 * (attenuation_db - 7.95) / (2.285 * transition)))
    length = ((estimate // (2 * bands)) + 1) * (2 * bands)

    rng = np.random.default_rng(12345)
    probe = rng.standard_normal(8 * length + (-8 * length) % bands)

    def build(scale: float, beta: float) -> PqmfBank:
        prototype = _lowpass(length, scale * np.pi / (2 * bands), beta)
        prototype = prototype / (bands * prototype.sum())
        return PqmfBank(bands, attenuation_db, prototype, _modulate(prototype, bands))

    scale, beta = 1.0, _kaiser_beta(attenuation_db)
    for _ in range(2):
        scale = _golden_min(lambda c: _roundtrip_error(build(c, beta), probe), 0.6, 1.6)
        beta = _golden_min(lambda b: _roundtrip_error(build(scale, b), probe), 4.0, 16.0)
    return build(scale, beta)


def _as_samples(x) -> np.ndarray:
    if isinstance(x, AudioBuffer):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def pqmf_analyze(bank: PqmfBank, buf) -> np.ndarray:
    """Decompose a waveform into (B, T/B) downsampled subband signals.

    The input is zero-padded up to a multiple of B, so the total sample
    count is preserved.
    """
    x = _as_samples(buf)
    bands, length = bank.bands, bank.taps
    pad_tail = (-x.shape[0]) % bands
    padded = np.concatenate([np.zeros(length - 1, x.dtype), x, np.zeros(pad_tail, x.dtype)])
    frames = np.lib.stride_tricks.sliding_window_view(padded, length)[::bands]
    return (frames @ bank.reversed_filters.T).T


def pqmf_synthesize(bank: PqmfBank, subbands: np.ndarray) -> np.ndarray:
    """Reconstruct a waveform of length B * T_sub from subband signals."""
    subbands = np.asarray(subbands)
    if subbands.ndim != 2 or subbands.shape[0] != bank.bands:
        raise ValueError(
            f"expected ({bank.bands}, T) subband matrix, got shape {subbands.shape}"
        )
    frames = subbands.T @ bank.reversed_filters  # (T_sub, L)
    total = subbands.shape[1] * bank.bands
    out = ad._fold_data(frames, (subbands.shape[1] - 1) * bank.bands + bank.taps, bank.bands)
    return out[:total]


def pqmf_synthesize_t(bank: PqmfBank, subbands: ad.Tensor) -> ad.Tensor:
    """Differentiable synthesis for (N, B, T_sub) tensors, used inside training losses."""
    n_sub = subbands.shape[-1]
    filters = ad.constant(bank.reversed_filters.astype(subbands.dtype))
    frames = ad.matmul(ad.transpose(subbands, (0, 2, 1)), filters)
    folded = ad.fold(frames, (n_sub - 1) * bank.bands + bank.taps, bank.bands)
    return folded[..., : n_sub * bank.bands]
