"""Finite-difference checks for every autodiff primitive."""

import numpy as np
import pytest

from fingertrain.errors import GradientError
from fingertrain.nn import tensor as T


def finite_difference(fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    grad = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = fn()
        flat[i] = orig - eps
        down = fn()
        flat[i] = orig
        grad[i] = (up - down) / (2 * eps)
    return out


def check_gradient(build_loss, params: list[T.Tensor], rel_tol: float = 1e-6):
    loss = build_loss()
    for p in params:
        p.zero_grad()
    T.backward(loss)
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = finite_difference(lambda: float(build_loss().data), p.data)
        denom = max(np.linalg.norm(numeric), 1e-10)
        assert np.linalg.norm(analytic - numeric) / denom < rel_tol, p.name


class TestPrimitiveGradients:
    def test_add_mul_broadcast(self, rng):
        a = T.parameter(rng.normal(size=(4, 3)), "a")
        b = T.parameter(rng.normal(size=(3,)), "b")
        c = T.parameter(rng.normal(size=(4, 3)), "c")
        check_gradient(lambda: T.tensor_sum((a + b) * c), [a, b, c])

    def test_matmul(self, rng):
        a = T.parameter(rng.normal(size=(5, 4)), "a")
        w = T.parameter(rng.normal(size=(4, 3)), "w")
        check_gradient(lambda: T.tensor_sum(a @ w), [a, w])

    def test_concat_reshape(self, rng):
        a = T.parameter(rng.normal(size=(3, 2)), "a")
        b = T.parameter(rng.normal(size=(3, 4)), "b")
        check_gradient(
            lambda: T.tensor_sum(T.reshape(T.concat([a, b], axis=1), (2, 9))), [a, b]
        )

    def test_gather_rows(self, rng):
        table = T.parameter(rng.normal(size=(6, 3)), "table")
        idx = np.array([0, 2, 2, 5, 1])
        weights = T.constant(rng.normal(size=(5, 3)))
        check_gradient(lambda: T.tensor_sum(T.gather_rows(table, idx) * weights), [table])

    def test_gather_out_of_range(self):
        table = T.parameter(np.zeros((3, 2)), "table")
        with pytest.raises(IndexError):
            T.gather_rows(table, np.array([3]))

    def test_segment_sum_mean(self, rng):
        x = T.parameter(rng.normal(size=(6, 3)), "x")
        seg = np.array([0, 0, 1, 1, 1, 2])
        w = T.constant(rng.normal(size=(3, 3)))
        check_gradient(lambda: T.tensor_sum(T.segment_sum(x, seg, 3) * w), [x])
        check_gradient(lambda: T.tensor_sum(T.segment_mean(x, seg, 3) * w), [x])

    def test_segment_max(self, rng):
        # distinct values keep the max differentiable
        x = T.parameter(rng.permutation(18).reshape(6, 3).astype(float), "x")
        seg = np.array([0, 0, 1, 1, 2, 2])
        w = T.constant(rng.normal(size=(3, 3)))
        check_gradient(lambda: T.tensor_sum(T.segment_max(x, seg, 3) * w), [x])

    def test_activations(self, rng):
        for act in (T.hardswish, T.gelu, T.leaky_relu, T.sigmoid):
            x = T.parameter(rng.normal(size=(4, 5)) * 2 + 0.1, f"x_{act.__name__}")
            w = T.constant(rng.normal(size=(4, 5)))
            check_gradient(lambda: T.tensor_sum(act(x) * w), [x], rel_tol=1e-5)

    def test_dropout_mask_gradient(self, rng):
        x = T.parameter(rng.normal(size=(8, 4)), "x")
        mask_rng = np.random.default_rng(7)
        out = T.dropout(x, 0.5, mask_rng, training=True)
        T.backward(T.tensor_sum(out))
        kept = out.data != 0
        assert np.allclose(x.grad[kept], 2.0)
        assert np.allclose(x.grad[~kept], 0.0)

    def test_dropout_eval_is_identity(self, rng):
        x = T.parameter(rng.normal(size=(3, 3)), "x")
        assert T.dropout(x, 0.5, np.random.default_rng(0), training=False) is x

    def test_losses(self, rng):
        pred = T.parameter(rng.normal(size=(6,)), "pred")
        target = T.constant(rng.normal(size=(6,)))
        check_gradient(lambda: T.mse(pred, target), [pred])

        logits = T.parameter(rng.normal(size=(4, 5)), "logits")
        targets = (rng.random((4, 5)) > 0.5).astype(float)
        weights = np.abs(rng.normal(size=5)) + 0.5
        mask = np.array([1.0, 1.0, 0.0, 1.0, 1.0])
        check_gradient(
            lambda: T.weighted_bce_with_logits(logits, targets, weights, mask), [logits]
        )

        probs = T.parameter(rng.random((5,)) * 0.8 + 0.1, "probs")
        y = T.constant((rng.random(5) > 0.5).astype(float))
        check_gradient(lambda: T.bce(probs, y), [probs], rel_tol=1e-5)

    def test_masked_bits_do_not_leak(self, rng):
        logits = T.parameter(rng.normal(size=(3, 4)), "logits")
        targets = np.ones((3, 4))
        mask = np.array([1.0, 0.0, 1.0, 0.0])
        loss = T.weighted_bce_with_logits(logits, targets, np.ones(4), mask)
        T.backward(loss)
        assert np.all(logits.grad[:, 1] == 0.0)
        assert np.all(logits.grad[:, 3] == 0.0)


class TestBackwardSemantics:
    def test_sum_gradient_is_ones(self):
        x = T.parameter(np.arange(6.0).reshape(2, 3), "x")
        T.backward(T.tensor_sum(x))
        assert np.all(x.grad == 1.0)

    def test_self_mse_zero_gradient(self):
        x = T.parameter(np.arange(4.0), "x")
        T.backward(T.mse(x, x))
        assert np.all(x.grad == 0.0)

    def test_unrecorded_tensor_raises(self):
        with pytest.raises(GradientError):
            T.backward(T.constant(np.array(1.0)))

    def test_non_scalar_raises(self):
        x = T.parameter(np.ones(3), "x")
        with pytest.raises(GradientError):
            T.backward(x + x)

    def test_gradient_accumulates_across_uses(self):
        x = T.parameter(np.array([2.0]), "x")
        y = x * x  # dy/dx = 2x via two uses of x
        T.backward(T.tensor_sum(y))
        assert x.grad[0] == pytest.approx(4.0)

    def test_diamond_graph(self, rng):
        x = T.parameter(rng.normal(size=(3,)), "x")
        a = x * 2.0
        b = x * 3.0
        T.backward(T.tensor_sum(a + b))
        assert np.allclose(x.grad, 5.0)
