"""Classic effects for corpus augmentation plus the post-generation chain.

Five randomized effects (chorus, distortion, 3-band EQ, reverb, flanger)
enrich the seed corpus before training; the post chain (parametric filter,
LFO amplitude modulation, gate envelope) shapes generated audio. Parameter
ranges follow the published augmentation table; outputs are peak-normalized
by the augmentation step, so the table's hot wet/dry levels cannot clip the
stored corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Union

import numpy as np
from scipy.signal import lfilter

from foleyforge.audio import AudioBuffer, peak_normalize

EFFECT_KINDS = ("chorus", "distortion", "eq3", "reverb", "flanger")

# Freeverb tunings at 44.1 kHz; scaled to the buffer rate on use.
_COMB_DELAYS = (1116, 1188, 1277, 1356, 1422, 1491, 1557, 1617)
_ALLPASS_DELAYS = (556, 441, 341, 225)
_TAIL_FLOOR = 1e-4  # -80 dBFS
_MAX_FEEDBACK = 0.99


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


def _require(condition: bool, message: str):
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class Chorus:
    length_ms: float
    voices: int
    wet_db: float
    dry_db: float
    rate_hz: float
    pitch_shift: float

    def __post_init__(self):
        _require(self.length_ms >= 0, "length_ms must be >= 0")
        _require(self.voices >= 0 and int(self.voices) == self.voices, "voices must be an integer >= 0")
        _require(self.rate_hz >= 0, "rate_hz must be >= 0")
        _require(self.pitch_shift >= 0, "pitch_shift must be >= 0")


@dataclass(frozen=True)
class Distortion:
    gain_db: float
    hardness: float

    def __post_init__(self):
        _require(self.hardness > 0, "hardness must be > 0")


@dataclass(frozen=True)
class Eq3:
    gains_db: tuple
    bandwidths_oct: tuple

    def __post_init__(self):
        _require(len(self.gains_db) == 3 and len(self.bandwidths_oct) == 3, "Eq3 wants three gains and three bandwidths")
        _require(all(bw > 0 for bw in self.bandwidths_oct), "bandwidths must be > 0")


@dataclass(frozen=True)
class Reverb:
    wet_db: float
    dry_db: float
    room: float
    damping: float
    lowpass_hz: float
    highpass_hz: float

    def __post_init__(self):
        # room > ~94 would push comb feedback to 1.0 and diverge
        _require(30 <= self.room <= 90, "room must be within [30, 90]")
        _require(0 <= self.damping <= 100, "damping must be within [0, 100]")
        _require(self.lowpass_hz >= 0 and self.highpass_hz >= 0, "filter cutoffs must be >= 0")


@dataclass(frozen=True)
class Flanger:
    length_ms: float
    feedback_db: float
    wet_db: float
    dry_db: float
    rate_hz: float

    def __post_init__(self):
        _require(self.length_ms >= 0, "length_ms must be >= 0")
        _require(self.rate_hz >= 0, "rate_hz must be >= 0")

    @property
    def feedback_linear(self) -> float:
        # stability over literal range fidelity: +6 dB would diverge
        return min(db_to_linear(self.feedback_db), _MAX_FEEDBACK)


EffectParams = Union[Chorus, Distortion, Eq3, Reverb, Flanger]

# Printed augmentation-table ranges; the sampler draws uniformly from these
# and the property tests verify it never leaves them.
TABLE_RANGES = {
    "chorus": {
        "length_ms": (0, 200),
        "voices": (0, 8),
        "wet_db": (30, 42),
        "dry_db": (30, 42),
        "rate_hz": (0, 16),
        "pitch_shift": (0, 1),
    },
    "distortion": {"gain_db": (10, 40), "hardness": (1, 10)},
    "eq3": {
        "gains_db": ((-5, 1), (-5, 5), (-5, 5)),
        "bandwidths_oct": ((0.1, 4), (0.1, 4), (0.1, 4)),
    },
    "reverb": {
        "wet_db": (0, 3),
        "dry_db": (0, 3),
        "room": (30, 90),
        "damping": (0, 100),
        "lowpass_hz": (0, 10000),
        "highpass_hz": (10000, 20000),
    },
    "flanger": {
        "length_ms": (0, 200),
        "feedback_db": (-120, 6),
        "wet_db": (-30, 12),
        "dry_db": (-30, 12),
        "rate_hz": (0, 100),
    },
}


def in_table_ranges(params: EffectParams) -> bool:
    """True when every field sits inside its printed table range."""
    ranges = TABLE_RANGES[effect_kind(params)]
    for name, bounds in ranges.items():
        value = getattr(params, name)
        if isinstance(value, tuple):
            for v, (lo, hi) in zip(value, bounds):
                if not lo <= v <= hi:
                    return False
        else:
            lo, hi = bounds
            if not lo <= value <= hi:
                return False
    return True

_KIND_BY_TYPE = {Chorus: "chorus", Distortion: "distortion", Eq3: "eq3", Reverb: "reverb", Flanger: "flanger"}


def effect_kind(params: EffectParams) -> str:
    return _KIND_BY_TYPE[type(params)]


@dataclass(frozen=True)
class AugmentationRecord:
    """Provenance of one augmented segment: exactly one effect per record."""

    source_id: str
    segment_index: int
    effect: EffectParams
    rng_seed: int

    def to_dict(self) -> dict:
        params = {f.name: getattr(self.effect, f.name) for f in fields(self.effect)}
        for key, value in params.items():
            if isinstance(value, tuple):
                params[key] = list(value)
        return {
            "source_id": self.source_id,
            "segment_index": self.segment_index,
            "effect_kind": effect_kind(self.effect),
            "effect_params": params,
            "rng_seed": int(self.rng_seed),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "AugmentationRecord":
        kind = payload["effect_kind"]
        params = dict(payload["effect_params"])
        for key, value in params.items():
            if isinstance(value, list):
                params[key] = tuple(value)
        cls_map = {v: k for k, v in _KIND_BY_TYPE.items()}
        return cls(
            source_id=payload["source_id"],
            segment_index=int(payload["segment_index"]),
            effect=cls_map[kind](**params),
            rng_seed=int(payload["rng_seed"]),
        )


# -- post chain parameter types ------------------------------------------------


@dataclass(frozen=True)
class ParamFilter:
    center_hz: float = 1000.0
    q: float = 1.0
    gain_db: float = 0.0

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("q must be > 0")
        if not 0 < self.center_hz:
            raise ValueError("center_hz must be positive")


@dataclass(frozen=True)
class LfoAm:
    rate_hz: float = 1.0
    depth: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.depth <= 1.0:
            raise ValueError("depth must be in [0, 1]")
        if self.rate_hz < 0:
            raise ValueError("rate_hz must be >= 0")


@dataclass(frozen=True)
class GateEnv:
    attack_ms: float = 10.0
    hold_ms: float = 100.0
    release_ms: float = 50.0
    enabled: bool = False

    def __post_init__(self):
        if min(self.attack_ms, self.hold_ms, self.release_ms) < 0:
            raise ValueError("gate times must be >= 0")


@dataclass(frozen=True)
class PostChain:
    filter: ParamFilter = field(default_factory=ParamFilter)
    lfo: LfoAm = field(default_factory=LfoAm)
    gate: GateEnv = field(default_factory=GateEnv)

    def to_dict(self) -> dict:
        return {
            "filter": {"center_hz": self.filter.center_hz, "q": self.filter.q, "gain_db": self.filter.gain_db},
            "lfo": {"rate_hz": self.lfo.rate_hz, "depth": self.lfo.depth},
            "gate": {
                "attack_ms": self.gate.attack_ms,
                "hold_ms": self.gate.hold_ms,
                "release_ms": self.gate.release_ms,
                "enabled": self.gate.enabled,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PostChain":
        return cls(
            filter=ParamFilter(**payload.get("filter", {})),
            lfo=LfoAm(**payload.get("lfo", {})),
            gate=GateEnv(**payload.get("gate", {})),
        )


# -- biquad helpers --------------------------------------------------------------


def _peaking_coeffs(f0: float, fs: int, gain_db: float, q: float | None = None, bw_oct: float | None = None):
    """RBJ cookbook peaking EQ; bandwidth given either as Q or in octaves."""
    a_lin = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * np.pi * f0 / fs
    sin_w0 = np.sin(w0)
    if bw_oct is not None:
        alpha = sin_w0 * np.sinh(np.log(2.0) / 2.0 * bw_oct * w0 / sin_w0)
    else:
        alpha = sin_w0 / (2.0 * q)
    b = np.array([1.0 + alpha * a_lin, -2.0 * np.cos(w0), 1.0 - alpha * a_lin])
    a = np.array([1.0 + alpha / a_lin, -2.0 * np.cos(w0), 1.0 - alpha / a_lin])
    return b / a[0], a / a[0]


def _one_pole_lowpass(x: np.ndarray, cutoff_hz: float, fs: int) -> np.ndarray:
    alpha = 1.0 - math.exp(-2.0 * math.pi * cutoff_hz / fs)
    return lfilter([alpha], [1.0, alpha - 1.0], x)


def _one_pole_highpass(x: np.ndarray, cutoff_hz: float, fs: int) -> np.ndarray:
    beta = math.exp(-2.0 * math.pi * cutoff_hz / fs)
    return lfilter([(1 + beta) / 2.0, -(1 + beta) / 2.0], [1.0, -beta], x)


def _fractional_read(x: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Linear-interpolated read at fractional sample positions; zero before t=0."""
    base = np.floor(positions).astype(np.int64)
    frac = positions - base
    lo = np.clip(base, 0, x.shape[0] - 1)
    hi = np.clip(base + 1, 0, x.shape[0] - 1)
    out = (1.0 - frac) * x[lo] + frac * x[hi]
    return np.where(base < 0, 0.0, out)


# -- the five effects -------------------------------------------------------------


def apply_chorus(buf: AudioBuffer, p: Chorus) -> AudioBuffer:
    """Dry path plus modulated-delay voices.

    Delay per voice swings around length/2 by at most length/2; the swing is
    further capped so the peak delay-derivative detune stays below
    pitch_shift semitones (scaled (v+1)/voices per voice).
    """
    x = buf.samples
    fs = buf.sample_rate
    out = db_to_linear(p.dry_db) * x
    if p.voices == 0:
        return AudioBuffer(out, fs)
    center = (p.length_ms / 2.0) * fs / 1000.0
    t = np.arange(x.shape[0])
    wet = np.zeros_like(x)
    for v in range(int(p.voices)):
        phase = 2.0 * np.pi * v / p.voices
        if p.rate_hz > 0:
            ratio = 2.0 ** (p.pitch_shift * (v + 1) / p.voices / 12.0) - 1.0
            pitch_cap = ratio * fs / (2.0 * np.pi * p.rate_hz)
            depth = min(center, pitch_cap)
        else:
            depth = center
        delay = center + depth * np.sin(2.0 * np.pi * p.rate_hz * t / fs + phase)
        wet += _fractional_read(x, t - delay)
    out = out + db_to_linear(p.wet_db) * wet
    return AudioBuffer(out, fs)


def apply_distortion(buf: AudioBuffer, p: Distortion) -> AudioBuffer:
    """y = tanh(hardness * gain * x) / tanh(hardness): odd, monotone, |y| < 1."""
    g = db_to_linear(p.gain_db)
    return AudioBuffer(np.tanh(p.hardness * g * buf.samples) / np.tanh(p.hardness), buf.sample_rate)


_EQ3_CENTERS = (200.0, 1000.0, 5000.0)


def apply_eq3(buf: AudioBuffer, p: Eq3) -> AudioBuffer:
    """Cascade of three peaking biquads at 200 Hz / 1 kHz / 5 kHz."""
    y = buf.samples
    for f0, gain, bw in zip(_EQ3_CENTERS, p.gains_db, p.bandwidths_oct):
        b, a = _peaking_coeffs(f0, buf.sample_rate, gain, bw_oct=bw)
        y = lfilter(b, a, y)
    return AudioBuffer(y, buf.sample_rate)


def _comb_lowpass(x: np.ndarray, delay: int, feedback: float, damp: float) -> np.ndarray:
    """Freeverb lowpass-feedback comb, block-processed (block <= delay)."""
    n = x.shape[0]
    y = np.zeros(n)
    stored = np.zeros(n)  # b[t] = x[t] + fb * f[t]
    zi = np.zeros(1)
    b_coef, a_coef = [1.0 - damp], [1.0, -damp]
    for start in range(0, n, delay):
        stop = min(start + delay, n)
        src = slice(start - delay, stop - delay)
        if start - delay < 0:
            pass  # buffer still empty: y stays zero for the first block
        else:
            y[start:stop] = stored[src]
        f_block, zi = lfilter(b_coef, a_coef, y[start:stop], zi=zi)
        stored[start:stop] = x[start:stop] + feedback * f_block
    return y


def _allpass(x: np.ndarray, delay: int, gain: float = 0.5) -> np.ndarray:
    """Freeverb allpass: y[n] = b[n-D] - x[n], b[n] = x[n] + g b[n-D]."""
    n = x.shape[0]
    stored = np.zeros(n)
    delayed = np.zeros(n)
    for start in range(0, n, delay):
        stop = min(start + delay, n)
        if start - delay >= 0:
            delayed[start:stop] = stored[start - delay : stop - delay]
        stored[start:stop] = x[start:stop] + gain * delayed[start:stop]
    return delayed - x


def apply_reverb(buf: AudioBuffer, p: Reverb, wet_scale: float = 1.0) -> AudioBuffer:
    """Freeverb topology: 8 parallel lowpass-feedback combs into 4 series allpasses.

    The output carries a decay tail, truncated where its envelope falls
    below -80 dBFS. `wet_scale` exists for tests that need a silent wet path.
    """
    x = buf.samples
    fs = buf.sample_rate
    feedback = 0.70 + (p.room - 30.0) / 60.0 * 0.28
    damp = p.damping / 100.0

    max_delay = max(_COMB_DELAYS) * fs / 44100.0
    passes = math.log(_TAIL_FLOOR) / math.log(feedback)
    tail = int(min(passes * max_delay + 4 * sum(_ALLPASS_DELAYS), 30 * fs))
    driven = np.concatenate([x, np.zeros(tail)])

    wet = np.zeros_like(driven)
    for d in _COMB_DELAYS:
        scaled = max(1, round(d * fs / 44100.0))
        wet += _comb_lowpass(driven, scaled, feedback, damp)
    for d in _ALLPASS_DELAYS:
        wet = _allpass(wet, max(1, round(d * fs / 44100.0)))
    wet = _one_pole_lowpass(wet, p.lowpass_hz, fs)
    wet = _one_pole_highpass(wet, p.highpass_hz, fs)
    wet *= 0.015 * db_to_linear(p.wet_db) * wet_scale

    out = wet
    out[: x.shape[0]] += db_to_linear(p.dry_db) * x

    # truncate the tail where its envelope stays below the floor
    keep = x.shape[0]
    block = 2048
    envelope_positions = range(x.shape[0], out.shape[0], block)
    for start in envelope_positions:
        if np.max(np.abs(out[start : start + block])) >= _TAIL_FLOOR:
            keep = min(start + block, out.shape[0])
    return AudioBuffer(out[:keep], fs)


def apply_flanger(buf: AudioBuffer, p: Flanger) -> AudioBuffer:
    """Single sine-swept modulated delay (0..length_ms) with feedback."""
    x = buf.samples
    fs = buf.sample_rate
    dry, wet = db_to_linear(p.dry_db), db_to_linear(p.wet_db)
    fb = p.feedback_linear
    half = (p.length_ms / 2.0) * fs / 1000.0
    t = np.arange(x.shape[0])
    delay = half * (1.0 + np.sin(2.0 * np.pi * p.rate_hz * t / fs))
    if fb < 1e-5:
        delayed = _fractional_read(x, t - delay)
        return AudioBuffer(dry * x + wet * delayed, fs)
    delay = np.maximum(delay, 1.0)  # feedback needs at least one sample of history
    line = np.zeros(x.shape[0])
    out = np.empty(x.shape[0])
    for n in range(x.shape[0]):
        pos = n - delay[n]
        base = int(pos)
        if pos < 0:
            tap = 0.0
        else:
            frac = pos - base
            nxt = line[base + 1] if base + 1 < n else 0.0
            tap = (1.0 - frac) * line[base] + frac * nxt
        line[n] = x[n] + fb * tap
        out[n] = dry * x[n] + wet * tap
    return AudioBuffer(out, fs)


# -- post chain ----------------------------------------------------------------


def apply_param_filter(buf: AudioBuffer, p: ParamFilter) -> AudioBuffer:
    b, a = _peaking_coeffs(p.center_hz, buf.sample_rate, p.gain_db, q=p.q)
    return AudioBuffer(lfilter(b, a, buf.samples), buf.sample_rate)


def apply_lfo_am(buf: AudioBuffer, p: LfoAm) -> AudioBuffer:
    t = np.arange(len(buf)) / buf.sample_rate
    modulator = 1.0 - p.depth * (1.0 + np.sin(2.0 * np.pi * p.rate_hz * t)) / 2.0
    return AudioBuffer(buf.samples * modulator, buf.sample_rate)


def apply_gate_env(buf: AudioBuffer, p: GateEnv) -> AudioBuffer:
    if not p.enabled:
        return buf
    fs = buf.sample_rate
    n = len(buf)
    attack = int(round(p.attack_ms * fs / 1000.0))
    hold = int(round(p.hold_ms * fs / 1000.0))
    release = int(round(p.release_ms * fs / 1000.0))
    env = np.zeros(n)
    a_end = min(attack, n)
    if attack > 0:
        env[:a_end] = np.arange(1, a_end + 1) / attack
    h_end = min(attack + hold, n)
    env[a_end:h_end] = 1.0
    r_end = min(attack + hold + release, n)
    if release > 0 and r_end > h_end:
        ramp = 1.0 - np.arange(1, r_end - h_end + 1) / release
        env[h_end:r_end] = ramp
    return AudioBuffer(buf.samples * env, fs)


def apply_post_chain(buf: AudioBuffer, chain: PostChain) -> AudioBuffer:
    out = apply_param_filter(buf, chain.filter)
    out = apply_lfo_am(out, chain.lfo)
    return apply_gate_env(out, chain.gate)


# -- randomized augmentation ------------------------------------------------------


def sample_effect_params(rng_seed: int, effect_kind: str) -> EffectParams:
    """Draw one effect's parameters uniformly over its table ranges; deterministic."""
    rng = np.random.default_rng(rng_seed)
    if effect_kind == "chorus":
        return Chorus(
            length_ms=rng.uniform(0, 200),
            voices=int(rng.integers(0, 9)),
            wet_db=rng.uniform(30, 42),
            dry_db=rng.uniform(30, 42),
            rate_hz=rng.uniform(0, 16),
            pitch_shift=rng.uniform(0, 1),
        )
    if effect_kind == "distortion":
        return Distortion(gain_db=rng.uniform(10, 40), hardness=rng.uniform(1, 10))
    if effect_kind == "eq3":
        return Eq3(
            gains_db=(rng.uniform(-5, 1), rng.uniform(-5, 5), rng.uniform(-5, 5)),
            bandwidths_oct=tuple(rng.uniform(0.1, 4) for _ in range(3)),
        )
    if effect_kind == "reverb":
        return Reverb(
            wet_db=rng.uniform(0, 3),
            dry_db=rng.uniform(0, 3),
            room=rng.uniform(30, 90),
            damping=rng.uniform(0, 100),
            lowpass_hz=rng.uniform(0, 10000),
            highpass_hz=rng.uniform(10000, 20000),
        )
    if effect_kind == "flanger":
        return Flanger(
            length_ms=rng.uniform(0, 200),
            feedback_db=rng.uniform(-120, 6),
            wet_db=rng.uniform(-30, 12),
            dry_db=rng.uniform(-30, 12),
            rate_hz=rng.uniform(0, 100),
        )
    raise ValueError(f"unknown effect kind {effect_kind!r}")


_APPLY = {
    Chorus: apply_chorus,
    Distortion: apply_distortion,
    Eq3: apply_eq3,
    Reverb: apply_reverb,
    Flanger: apply_flanger,
}


def apply_effect(buf: AudioBuffer, params: EffectParams) -> AudioBuffer:
    return _APPLY[type(params)](buf, params)


def augment_corpus(
    segments: list[AudioBuffer], seed: int, source_ids: list[str] | None = None
) -> tuple[list[AudioBuffer], list[AugmentationRecord]]:
    """One randomized effect per segment, cycling through the five kinds.

    Returns peak-normalized variants plus full provenance records; callers
    keep the original segments alongside the variants when assembling the
    training corpus.
    """
    if not segments:
        raise ValueError("cannot augment an empty corpus")
    if source_ids is None:
        source_ids = [f"segment-{i}" for i in range(len(segments))]
    variants: list[AudioBuffer] = []
    records: list[AugmentationRecord] = []
    for i, seg in enumerate(segments):
        kind = EFFECT_KINDS[i % len(EFFECT_KINDS)]
        child_seed = int(np.random.SeedSequence([int(seed), i]).generate_state(1, np.uint64)[0])
        params = sample_effect_params(child_seed, kind)
        variants.append(peak_normalize(apply_effect(seg, params)))
        records.append(
            AugmentationRecord(source_id=source_ids[i], segment_index=i, effect=params, rng_seed=child_seed)
        )
    return variants, records
