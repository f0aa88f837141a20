"""Neural building blocks over the autodiff engine: 1-D convs, activations, Adam."""

from __future__ import annotations

import numpy as np

from foleyforge import autodiff as ad


class Conv1d:
    """1-D convolution via unfold + matmul. Input (N, C, T) -> (N, out, T')."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        pad: tuple[int, int] = (0, 0),
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        rng = rng or np.random.default_rng(0)
        scale = np.sqrt(2.0 / (in_channels * kernel))  # He init for leaky rectifiers
        weight = rng.normal(0.0, scale, size=(in_channels * kernel, out_channels))
        self.weight = ad.Tensor(weight.astype(dtype), requires_grad=True)
        self.bias = ad.Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        n, c, t = x.shape
        padded = ad.pad_last(x, *self.pad) if self.pad != (0, 0) else x
        frames = ad.unfold(padded, self.kernel, self.stride)  # (N, C, T', k)
        frames = ad.transpose(frames, (0, 2, 1, 3))  # (N, T', C, k)
        t_out = frames.shape[1]
        flat = frames.reshape(n, t_out, c * self.kernel)
        out = ad.matmul(flat, self.weight) + self.bias  # (N, T', out)
        return ad.transpose(out, (0, 2, 1))

    def out_length(self, t: int) -> int:
        return (t + sum(self.pad) - self.kernel) // self.stride + 1

    def parameters(self) -> dict[str, ad.Tensor]:
        return {"weight": self.weight, "bias": self.bias}


class LeakyReLU:
    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return ad.leaky_relu(x, self.slope)

    def parameters(self) -> dict[str, ad.Tensor]:
        return {}


class Tanh:
    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return ad.tanh(x)

    def parameters(self) -> dict[str, ad.Tensor]:
        return {}


class UpsampleNearest:
    def __init__(self, factor: int):
        self.factor = factor

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return ad.repeat_last(x, self.factor)

    def parameters(self) -> dict[str, ad.Tensor]:
        return {}


class Sequential:
    def __init__(self, *layers):
        self.layers = list(layers)

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def parameters(self) -> dict[str, ad.Tensor]:
        out: dict[str, ad.Tensor] = {}
        for i, layer in enumerate(self.layers):
            for name, tensor in layer.parameters().items():
                out[f"{i}.{name}"] = tensor
        return out


class Adam:
    """Adaptive-moment gradient descent over a named parameter dict."""

    def __init__(self, params: dict[str, ad.Tensor], lr: float = 1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1**t
        bias2 = 1.0 - self.beta2**t
        for name, param in self.params.items():
            if param.grad is None:
                continue
            g = param.grad
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            param.data = param.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
