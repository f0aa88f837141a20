"""Minimal reverse-mode automatic differentiation over numpy arrays.

Deliberately small: only the operations the multiband VAE, its losses and
the discriminator actually use. Dynamic graphs (rebuilt per step), so
ordinary Python control flow is fine. Computation dtype follows the input
arrays; training runs float32, gradient verification float64.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "constant", "matmul", "unfold", "fold", "rfft_magnitude"]


class Tensor:
    """A node in the autodiff graph: value, optional gradient, backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    # -- graph mechanics ---------------------------------------------------

    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        # Accumulation always builds a fresh array, so holding a reference
        # to the incoming gradient is safe (no op mutates grads in place).
        self.grad = grad if self.grad is None else self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    # -- convenience -------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other, self.dtype))

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _wrap(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_wrap(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return narrow(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def _wrap(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def constant(data, dtype=None) -> Tensor:
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    return Tensor(arr)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data, parents, backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, _parents=tuple(parents), _backward=backward)
    return Tensor(data)


# -- elementwise ----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data / b.data

    def backward(g):
        a._accumulate(_unbroadcast(g / b.data, a.shape))
        b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(-g)

    return _make(-a.data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out_data)

    return _make(out_data, (a,), backward)


def log(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g / a.data)

    return _make(np.log(a.data), (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward(g):
        a._accumulate(g * (0.5 / np.maximum(out_data, np.finfo(out_data.dtype).tiny)))

    return _make(out_data, (a,), backward)


def square(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g * (2.0 * a.data))

    return _make(a.data * a.data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    positive = a.data > 0
    out_data = np.where(positive, a.data, slope * a.data)

    def backward(g):
        a._accumulate(np.where(positive, g, np.asarray(slope, a.dtype) * g))

    return _make(out_data, (a,), backward)


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)

    def backward(g):
        a._accumulate(g * sign)

    return _make(np.abs(a.data), (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp with pass-through gradient strictly inside [lo, hi]."""
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        a._accumulate(np.where(inside, g, 0.0))

    return _make(np.clip(a.data, lo, hi), (a,), backward)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; ties route the gradient to the first argument."""
    a_wins = a.data >= b.data

    def backward(g):
        a._accumulate(_unbroadcast(np.where(a_wins, g, 0.0), a.shape))
        b._accumulate(_unbroadcast(np.where(a_wins, 0.0, g), b.shape))

    return _make(np.where(a_wins, a.data, b.data), (a, b), backward)


# -- reductions -----------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g, a.shape)
        elif keepdims:
            grad = np.broadcast_to(g, a.shape)
        else:
            grad = np.broadcast_to(np.expand_dims(g, axis), a.shape)
        a._accumulate(grad.astype(a.dtype, copy=False))

    return _make(out_data, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.shape[ax] for ax in _axes(axis)])
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / float(count))


def _axes(axis):
    if isinstance(axis, tuple):
        return axis
    return (axis,)


# -- shape manipulation -----------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    old_shape = a.shape

    def backward(g):
        a._accumulate(g.reshape(old_shape))

    return _make(a.data.reshape(shape), (a,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)

    def backward(g):
        a._accumulate(np.transpose(g, inverse))

    return _make(np.ascontiguousarray(np.transpose(a.data, axes)), (a,), backward)


def narrow(a: Tensor, key) -> Tensor:
    """Basic slicing with zero-fill gradient outside the slice."""

    def backward(g):
        grad = np.zeros(a.shape, dtype=a.dtype)
        grad[key] = g
        a._accumulate(grad)

    return _make(a.data[key], (a,), backward)


def pad_last(a: Tensor, left: int, right: int) -> Tensor:
    """Zero-pad the last axis."""
    width = [(0, 0)] * (a.data.ndim - 1) + [(left, right)]
    out_data = np.pad(a.data, width)
    n = a.shape[-1]

    def backward(g):
        a._accumulate(g[..., left : left + n])

    return _make(out_data, (a,), backward)


def reflect_pad_last(a: Tensor, pad: int) -> Tensor:
    """Reflect-pad the last axis (requires pad < length)."""
    n = a.shape[-1]
    if pad >= n:
        raise ValueError(f"reflect pad {pad} needs input longer than pad, got {n}")
    width = [(0, 0)] * (a.data.ndim - 1) + [(pad, pad)]
    out_data = np.pad(a.data, width, mode="reflect")

    def backward(g):
        grad = g[..., pad : pad + n].copy()
        grad[..., 1 : pad + 1] += g[..., :pad][..., ::-1]
        grad[..., n - pad - 1 : n - 1] += g[..., pad + n :][..., ::-1]
        a._accumulate(grad)

    return _make(out_data, (a,), backward)


def repeat_last(a: Tensor, factor: int) -> Tensor:
    """Nearest-neighbor upsampling of the last axis."""
    out_data = np.repeat(a.data, factor, axis=-1)

    def backward(g):
        a._accumulate(g.reshape(*a.shape, factor).sum(axis=-1))

    return _make(out_data, (a,), backward)


# -- linear algebra -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        a._accumulate(_unbroadcast(ga, a.shape))
        b._accumulate(_unbroadcast(gb, b.shape))

    return _make(out_data, (a, b), backward)


# -- framing ------------------------------------------------------------------


def unfold(a: Tensor, size: int, step: int) -> Tensor:
    """Slide a window over the last axis: (..., T) -> (..., frames, size).

    Requires (T - size) divisible by step so every sample beyond the last
    full frame would be dropped; callers pad beforehand.
    """
    out_data = _unfold_data(a.data, size, step)

    def backward(g):
        a._accumulate(_fold_data(g, a.shape[-1], step))

    return _make(out_data, (a,), backward)


def fold(a: Tensor, out_length: int, step: int) -> Tensor:
    """Overlap-add frames back onto a signal: adjoint of unfold."""
    out_data = _fold_data(a.data, out_length, step)

    def backward(g):
        a._accumulate(_unfold_data(g, a.shape[-1], step))

    return _make(out_data, (a,), backward)


def _unfold_data(x: np.ndarray, size: int, step: int) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(x, size, axis=-1)
    return np.ascontiguousarray(view[..., ::step, :])


def _fold_data(frames: np.ndarray, out_length: int, step: int) -> np.ndarray:
    *lead, n_frames, size = frames.shape
    out = np.zeros((*lead, out_length), dtype=frames.dtype)
    if size % step == 0:
        # Strided fast path: each frame splits into size/step chunks of
        # length step landing at consecutive chunk slots.
        chunks = size // step
        pad_chunks = n_frames + chunks - 1
        buf = np.zeros((*lead, pad_chunks, step), dtype=frames.dtype)
        fr = frames.reshape(*lead, n_frames, chunks, step)
        for c in range(chunks):
            buf[..., c : c + n_frames, :] += fr[..., :, c, :]
        flat = buf.reshape(*lead, pad_chunks * step)
        n = min(out_length, pad_chunks * step)
        out[..., :n] = flat[..., :n]
        return out
    for j in range(size):
        hi = j + (n_frames - 1) * step + 1
        out[..., j:hi:step] += frames[..., :, j]
    return out


# -- spectra -------------------------------------------------------------------


def rfft_magnitude(a: Tensor) -> Tensor:
    """|rfft| over the last axis, differentiable through the complex spectrum."""
    spectrum = np.fft.rfft(a.data, axis=-1)
    out_data = np.abs(spectrum)
    n = a.shape[-1]

    def backward(g):
        tiny = np.finfo(out_data.dtype).tiny
        phase = spectrum / np.maximum(out_data, tiny)
        g_complex = (g * phase).astype(spectrum.dtype, copy=False)
        g_complex[..., 1:-1] *= 0.5
        grad = np.fft.irfft(g_complex, n=n, axis=-1) * n
        a._accumulate(grad.astype(a.dtype, copy=False))

    return _make(out_data, (a,), backward)
