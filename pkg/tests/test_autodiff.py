import numpy as np
import pytest

from foleyforge import autodiff as ad


def finite_diff_check(build_loss, leaves, h=1e-6, rtol=1e-5, atol=1e-8, n_probe=12, seed=0):
    """Compare reverse-mode gradients of a scalar loss against central differences."""
    for leaf in leaves:
        leaf.zero_grad()
    loss = build_loss()
    loss.backward()
    rng = np.random.default_rng(seed)
    for leaf in leaves:
        assert leaf.grad is not None, "leaf received no gradient"
        flat = leaf.data.reshape(-1)
        grad = leaf.grad.reshape(-1)
        probes = rng.choice(flat.size, size=min(n_probe, flat.size), replace=False)
        for i in probes:
            orig = flat[i]
            flat[i] = orig + h
            up = build_loss().item()
            flat[i] = orig - h
            down = build_loss().item()
            flat[i] = orig
            fd = (up - down) / (2 * h)
            assert fd == pytest.approx(grad[i], rel=rtol, abs=atol), (
                f"grad mismatch at flat index {i}: analytic {grad[i]}, fd {fd}"
            )


def leaf(shape, seed=0, scale=1.0, positive=False):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=shape) * scale
    if positive:
        data = np.abs(data) + 0.5
    return ad.Tensor(np.ascontiguousarray(data), requires_grad=True)


class TestElementwise:
    def test_arith_chain(self):
        a, b = leaf((3, 4), 1), leaf((3, 4), 2, positive=True)
        finite_diff_check(lambda: ((a * b + a - b / a) * 0.5).sum(), [a, b])

    def test_broadcasting(self):
        a, b = leaf((3, 4), 3), leaf((1, 4), 4)
        finite_diff_check(lambda: (a * b + b).sum(), [a, b])

    def test_exp_log_sqrt(self):
        a = leaf((5,), 5, positive=True)
        finite_diff_check(lambda: (ad.exp(a) + ad.log(a) + ad.sqrt(a)).sum(), [a])

    def test_tanh_square_abs(self):
        a = leaf((6,), 6)
        finite_diff_check(lambda: (ad.tanh(a) + ad.square(a) + ad.absolute(a)).sum(), [a])

    def test_leaky_relu(self):
        a = leaf((40,), 7)
        finite_diff_check(lambda: ad.leaky_relu(a, 0.2).sum(), [a])

    def test_clip_passthrough(self):
        a = ad.Tensor(np.array([-2.0, -0.5, 0.5, 2.0]), requires_grad=True)
        out = ad.clip(a, -1.0, 1.0)
        out.sum().backward()
        assert np.array_equal(a.grad, [0.0, 1.0, 1.0, 0.0])


class TestReductions:
    def test_sum_axes(self):
        a = leaf((3, 4, 5), 8)
        finite_diff_check(lambda: ad.square(a.sum(axis=1)).sum(), [a])
        finite_diff_check(lambda: ad.square(a.sum(axis=(0, 2))).sum(), [a])

    def test_mean(self):
        a = leaf((4, 6), 9)
        finite_diff_check(lambda: ad.square(a.mean(axis=0)).sum(), [a])
        finite_diff_check(lambda: a.mean(), [a])


class TestShapes:
    def test_reshape_transpose(self):
        a = leaf((2, 3, 4), 10)
        finite_diff_check(
            lambda: ad.square(ad.transpose(a.reshape(6, 4), (1, 0))).sum(), [a]
        )

    def test_narrow(self):
        a = leaf((5, 8), 11)
        finite_diff_check(lambda: ad.square(a[1:4, 2:7]).sum(), [a])

    def test_pad_repeat(self):
        a = leaf((2, 6), 12)
        finite_diff_check(
            lambda: ad.square(ad.repeat_last(ad.pad_last(a, 2, 3), 3)).sum(), [a]
        )


class TestMatmul:
    def test_plain(self):
        a, b = leaf((4, 5), 13), leaf((5, 3), 14)
        finite_diff_check(lambda: ad.square(ad.matmul(a, b)).sum(), [a, b])

    def test_batched_against_shared(self):
        a, b = leaf((3, 4, 5), 15), leaf((5, 2), 16)
        finite_diff_check(lambda: ad.square(ad.matmul(a, b)).sum(), [a, b])


class TestFraming:
    @pytest.mark.parametrize("size,step", [(8, 4), (9, 4), (6, 6), (8, 2)])
    def test_unfold(self, size, step):
        t_len = size + 5 * step
        a = leaf((2, t_len), 17)
        finite_diff_check(lambda: ad.square(ad.unfold(a, size, step)).sum(), [a])

    @pytest.mark.parametrize("size,step", [(8, 4), (9, 4), (8, 2)])
    def test_fold(self, size, step):
        frames = leaf((2, 6, size), 18)
        out_len = (6 - 1) * step + size
        finite_diff_check(lambda: ad.square(ad.fold(frames, out_len, step)).sum(), [frames])

    def test_fold_is_unfold_adjoint(self):
        # <unfold(x), y> == <x, fold(y)> for matching geometry
        rng = np.random.default_rng(19)
        x = rng.normal(size=37)
        size, step = 8, 4
        frames = ad._unfold_data(x, size, step)
        y = rng.normal(size=frames.shape)
        lhs = float(np.sum(frames * y))
        rhs = float(np.sum(x * ad._fold_data(y, x.size, step)))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestSpectral:
    def test_rfft_magnitude_values(self):
        x = np.sin(2 * np.pi * 4 * np.arange(32) / 32)
        mag = ad.rfft_magnitude(ad.Tensor(x)).data
        assert mag[4] == pytest.approx(16.0, rel=1e-9)
        others = np.delete(mag, 4)
        assert np.max(others) < 1e-9

    def test_rfft_magnitude_grad(self):
        a = leaf((3, 16), 20)
        w = np.random.default_rng(21).normal(size=(3, 9))
        finite_diff_check(
            lambda: (ad.rfft_magnitude(a) * ad.constant(w)).sum(), [a], rtol=1e-4
        )

    def test_rfft_magnitude_grad_through_log(self):
        a = leaf((2, 32), 22)
        finite_diff_check(
            lambda: ad.log(ad.rfft_magnitude(a) + 1e-4).sum(), [a], rtol=1e-4
        )


class TestGraph:
    def test_diamond_reuse(self):
        a = leaf((4,), 23)
        finite_diff_check(lambda: (ad.tanh(a) * ad.tanh(a) + ad.tanh(a)).sum(), [a])

    def test_constant_blocks_gradient(self):
        a = ad.constant(np.ones(3))
        b = leaf((3,), 24)
        out = (a * b).sum()
        out.backward()
        assert a.grad is None
        assert b.grad is not None

    def test_backward_requires_scalar(self):
        a = leaf((3,), 25)
        with pytest.raises(ValueError):
            (a * 2.0).backward()

    def test_mini_mlp(self):
        x = ad.constant(np.random.default_rng(26).normal(size=(5, 7)))
        w1, b1 = leaf((7, 6), 27, 0.5), leaf((6,), 28, 0.1)
        w2 = leaf((6, 1), 29, 0.5)

        def loss():
            h = ad.leaky_relu(ad.matmul(x, w1) + b1, 0.2)
            return ad.square(ad.matmul(h, w2)).mean()

        finite_diff_check(loss, [w1, b1, w2])

    def test_dtype_preserved(self):
        a = ad.Tensor(np.ones((3,), dtype=np.float32), requires_grad=True)
        out = ad.tanh(a * 2.0).sum()
        assert out.dtype == np.float32
        out.backward()
        assert a.grad.dtype == np.float32


class TestExtraOps:
    def test_maximum(self):
        a, b = leaf((8,), 30), leaf((8,), 31)
        finite_diff_check(lambda: ad.square(ad.maximum(a, b)).sum(), [a, b])

    def test_reflect_pad(self):
        a = leaf((2, 10), 32)
        finite_diff_check(lambda: ad.square(ad.reflect_pad_last(a, 4)).sum(), [a])

    def test_reflect_pad_matches_numpy(self):
        x = np.arange(6.0)
        out = ad.reflect_pad_last(ad.constant(x), 3)
        assert np.array_equal(out.data, np.pad(x, 3, mode="reflect"))

    def test_reflect_pad_too_wide(self):
        with pytest.raises(ValueError):
            ad.reflect_pad_last(ad.constant(np.zeros(3)), 3)
