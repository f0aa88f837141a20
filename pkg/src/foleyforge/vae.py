"""Multiband variational autoencoder: encoder, reparameterized sampling, decoder,
KL term, and the stage-1 training loss (multiscale spectral + beta * KL).

The model runs on subband frames from the PQMF bank; strided convolutions
give a total stride of 256 subband samples per latent frame. Inference is
float32; gradient verification builds float64 models.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from foleyforge import autodiff as ad
from foleyforge import nn
from foleyforge.pqmf import PqmfBank, pqmf_synthesize_t
from foleyforge.spectral import SpectralConfig, hann_window

LATENT_STRIDE = 256  # subband samples per latent frame (4 conv blocks, stride 4)


@dataclass(frozen=True)
class ModelConfig:
    latent_dim: int = 128
    bands: int = 16
    channels: tuple = (32, 64, 128, 256)
    kernel: int = 9
    stride: int = 4
    leak: float = 0.2
    logvar_min: float = -30.0
    logvar_max: float = 20.0
    sample_rate: int = 44100
    init_seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.latent_dim <= 0:
            raise ValueError("latent_dim must be positive")
        if self.stride ** len(self.channels) != LATENT_STRIDE:
            raise ValueError("encoder blocks must multiply to a stride of 256")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def samples_per_latent_frame(self) -> int:
        return self.bands * LATENT_STRIDE

    @property
    def latent_frame_rate(self) -> float:
        return self.sample_rate / self.samples_per_latent_frame

    def to_dict(self) -> dict:
        return {
            "latent_dim": self.latent_dim,
            "bands": self.bands,
            "channels": list(self.channels),
            "kernel": self.kernel,
            "stride": self.stride,
            "leak": self.leak,
            "logvar_min": self.logvar_min,
            "logvar_max": self.logvar_max,
            "sample_rate": self.sample_rate,
            "init_seed": self.init_seed,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        payload = dict(payload)
        payload["channels"] = tuple(payload["channels"])
        return cls(**payload)


TINY_PROFILE = ModelConfig(latent_dim=16, bands=8, channels=(16, 32, 64, 128))
FULL_PROFILE = ModelConfig()

PROFILES = {"tiny": TINY_PROFILE, "full": FULL_PROFILE}


@dataclass(frozen=True)
class Posterior:
    """Diagonal-Gaussian posterior per latent frame: (T_z, D) mean and log-variance."""

    mu: np.ndarray
    log_var: np.ndarray


@dataclass(frozen=True)
class LatentTrajectory:
    """Time series of latent vectors at the model's latent frame rate."""

    frames: np.ndarray  # (T_z, D)
    frame_rate: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("latent frames must be finite")


def _same_pad(kernel: int) -> tuple[int, int]:
    return (kernel // 2, kernel // 2)


def _stride_pad(kernel: int, stride: int) -> tuple[int, int]:
    total = kernel - stride
    return (total // 2, total - total // 2)


class MultibandVAE:
    """Encoder/decoder pair over subband frames."""

    def __init__(self, config: ModelConfig):
        self.config = config
        dtype = config.np_dtype
        rng = np.random.default_rng(config.init_seed)
        k, s, leak = config.kernel, config.stride, config.leak
        chans = config.channels

        enc_layers = []
        prev = config.bands
        for ch in chans:
            enc_layers.append(nn.Conv1d(prev, ch, k, stride=s, pad=_stride_pad(k, s), rng=rng, dtype=dtype))
            enc_layers.append(nn.LeakyReLU(leak))
            prev = ch
        self.encoder = nn.Sequential(*enc_layers)
        self.head_mu = nn.Conv1d(prev, config.latent_dim, 1, rng=rng, dtype=dtype)
        self.head_logvar = nn.Conv1d(prev, config.latent_dim, 1, rng=rng, dtype=dtype)

        dec_layers = [nn.Conv1d(config.latent_dim, chans[-1], k, pad=_same_pad(k), rng=rng, dtype=dtype), nn.LeakyReLU(leak)]
        dec_chans = list(reversed(chans)) + [chans[0]]
        for c_in, c_out in zip(dec_chans[:-1], dec_chans[1:]):
            dec_layers.append(nn.UpsampleNearest(s))
            dec_layers.append(nn.Conv1d(c_in, c_out, k, pad=_same_pad(k), rng=rng, dtype=dtype))
            dec_layers.append(nn.LeakyReLU(leak))
        dec_layers.append(nn.Conv1d(chans[0], config.bands, k, pad=_same_pad(k), rng=rng, dtype=dtype))
        dec_layers.append(nn.Tanh())
        self.decoder = nn.Sequential(*dec_layers)

    # -- parameter access --------------------------------------------------

    def encoder_parameters(self) -> dict[str, ad.Tensor]:
        out = {f"encoder.{n}": t for n, t in self.encoder.parameters().items()}
        out.update({f"head_mu.{n}": t for n, t in self.head_mu.parameters().items()})
        out.update({f"head_logvar.{n}": t for n, t in self.head_logvar.parameters().items()})
        return out

    def decoder_parameters(self) -> dict[str, ad.Tensor]:
        return {f"decoder.{n}": t for n, t in self.decoder.parameters().items()}

    def parameters(self) -> dict[str, ad.Tensor]:
        return {**self.encoder_parameters(), **self.decoder_parameters()}

    # -- tensor-path (training) ---------------------------------------------

    def encode_t(self, x: ad.Tensor) -> tuple[ad.Tensor, ad.Tensor]:
        """(N, B, T) -> mu, log_var tensors of shape (N, D, T_z)."""
        h = self.encoder(x)
        mu = self.head_mu(h)
        log_var = ad.clip(self.head_logvar(h), self.config.logvar_min, self.config.logvar_max)
        return mu, log_var

    def decode_t(self, z: ad.Tensor) -> ad.Tensor:
        """(N, D, T_z) -> subband frames (N, B, T_z * 256), strictly inside (-1, 1)."""
        return self.decoder(z)

    # -- numpy-path (inference) ----------------------------------------------

    def _check_subband(self, sub: np.ndarray) -> np.ndarray:
        sub = np.asarray(sub, dtype=self.config.np_dtype)
        if sub.ndim != 2 or sub.shape[0] != self.config.bands:
            raise ValueError(f"expected ({self.config.bands}, T) subband frame, got {sub.shape}")
        if sub.shape[1] < LATENT_STRIDE:
            raise ValueError(
                f"input too short: {sub.shape[1]} subband samples < one latent frame ({LATENT_STRIDE})"
            )
        return sub

    def pad_subband(self, sub: np.ndarray) -> np.ndarray:
        """Zero-pad subband length up to a whole number of latent frames."""
        t = sub.shape[-1]
        pad = (-t) % LATENT_STRIDE
        if pad:
            sub = np.pad(sub, [(0, 0)] * (sub.ndim - 1) + [(0, pad)])
        return sub

    def encode(self, sub: np.ndarray) -> Posterior:
        sub = self.pad_subband(self._check_subband(sub))
        mu, log_var = self.encode_t(ad.constant(sub[None]))
        return Posterior(mu.data[0].T.copy(), log_var.data[0].T.copy())

    def decode(self, z) -> np.ndarray:
        frames = z.frames if isinstance(z, LatentTrajectory) else np.asarray(z)
        if frames.ndim != 2 or frames.shape[1] != self.config.latent_dim:
            raise ValueError(
                f"expected (T_z, {self.config.latent_dim}) latent trajectory, got {frames.shape}"
            )
        z_t = ad.constant(frames.T[None].astype(self.config.np_dtype, copy=False))
        out = self.decode_t(z_t).data[0]
        # float32 tanh rounds to 1.0 when saturated; keep the bound strict
        limit = np.nextafter(self.config.np_dtype(1.0), self.config.np_dtype(0.0))
        return np.clip(out, -limit, limit)


def reparameterize(post: Posterior, noise_seed: int) -> LatentTrajectory:
    """z = mu + exp(log_var / 2) * eps with seeded standard-normal noise."""
    rng = np.random.default_rng(noise_seed)
    eps = rng.standard_normal(post.mu.shape)
    frames = post.mu + np.exp(0.5 * post.log_var) * eps
    return LatentTrajectory(frames.astype(post.mu.dtype, copy=False), frame_rate=0.0)


def kl_divergence(post: Posterior) -> tuple[float, np.ndarray]:
    """KL to the standard-normal prior: frame-averaged total and per-dimension vector."""
    per_element = 0.5 * (post.mu**2 + np.exp(post.log_var) - post.log_var - 1.0)
    per_dim = per_element.mean(axis=0)
    return float(per_dim.sum()), per_dim


# -- training loss ------------------------------------------------------------


def _stft_magnitude_t(x: ad.Tensor, fft_size: int, dtype) -> ad.Tensor:
    hop = fft_size // 4
    padded = ad.reflect_pad_last(x, fft_size // 2)
    frames = ad.unfold(padded, fft_size, hop)
    window = ad.constant(hann_window(fft_size).astype(dtype))
    return ad.rfft_magnitude(frames * window)


def spectral_distance_t(y: ad.Tensor, target: ad.Tensor, cfg: SpectralConfig) -> ad.Tensor:
    """Batched tensor version of the multiscale spectral distance, (N,) -> scalar mean.

    Matches spectral.multiscale_spectral_distance numerically for each
    batch element.
    """
    dtype = y.dtype
    tiny = ad.constant(np.full(y.shape[0], 1e-30, dtype=dtype))
    total = None
    for fft_size in cfg.fft_sizes:
        sy = _stft_magnitude_t(y, fft_size, dtype)
        st = _stft_magnitude_t(target, fft_size, dtype)
        diff = sy - st
        fro = ad.sqrt(ad.square(diff).sum(axis=(1, 2)))
        norm_y = ad.sqrt(ad.square(sy).sum(axis=(1, 2)))
        norm_t = ad.sqrt(ad.square(st).sum(axis=(1, 2)))
        denom = ad.maximum(ad.maximum(norm_y, norm_t), tiny)
        floor = float(cfg.log_floor)
        log_l1 = ad.absolute(ad.log(sy + floor) - ad.log(st + floor)).mean(axis=(1, 2))
        term = fro / denom + log_l1
        total = term if total is None else total + term
    return total.mean()


def kl_terms_t(mu: ad.Tensor, log_var: ad.Tensor) -> ad.Tensor:
    """Scalar KL total (sum over dims of the frame-and-batch-averaged KL)."""
    per_element = (ad.square(mu) + ad.exp(log_var) - log_var - 1.0) * 0.5
    return per_element.mean(axis=(0, 2)).sum()


def stage1_loss(
    model: MultibandVAE,
    x: np.ndarray,
    beta: float,
    seed: int,
    bank: PqmfBank,
    cfg: SpectralConfig | None = None,
) -> tuple[ad.Tensor, dict]:
    """Reconstruction (multiscale spectral on synthesized waveforms) + beta * KL.

    `x` is a batch of subband frames (N, B, T) with T a multiple of 256.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    cfg = cfg or SpectralConfig()
    dtype = model.config.np_dtype
    x = np.asarray(x, dtype=dtype)
    if x.ndim == 2:
        x = x[None]
    x_t = ad.constant(x)

    mu, log_var = model.encode_t(x_t)
    rng = np.random.default_rng(seed)
    eps = ad.constant(rng.standard_normal(mu.shape).astype(dtype))
    z = mu + ad.exp(log_var * 0.5) * eps
    decoded = model.decode_t(z)

    target = pqmf_synthesize_t(bank, ad.constant(x))
    produced = pqmf_synthesize_t(bank, decoded)
    spectral = spectral_distance_t(produced, target.detach(), cfg)
    kl_total = kl_terms_t(mu, log_var)
    loss = spectral + float(beta) * kl_total
    if not np.isfinite(loss.data):
        raise FloatingPointError("stage-1 loss diverged to a non-finite value")
    components = {
        "loss_total": float(loss.data),
        "loss_spectral": float(spectral.data),
        "loss_kl": float(kl_total.data),
        "beta": float(beta),
    }
    return loss, components


def gradients(params: dict[str, ad.Tensor], loss_builder: Callable[[], ad.Tensor]) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar loss for every named parameter."""
    for t in params.values():
        t.zero_grad()
    loss = loss_builder()
    if not np.isfinite(loss.data):
        raise FloatingPointError("loss is not finite; refusing to differentiate")
    loss.backward()
    return {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data)) for name, t in params.items()
    }
