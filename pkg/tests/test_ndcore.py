import numpy as np
import pytest

from actemb import ndcore
from actemb.ndcore import Rng


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(ndcore.matmul(np.eye(2), m), m)

    def test_hand_check(self):
        out = ndcore.matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 11.0

    def test_against_naive_oracle(self):
        rng = Rng(5)
        a = rng.normal((5, 4))
        b = rng.normal((4, 3))
        assert np.abs(ndcore.matmul(a, b) - naive_matmul(a, b)).max() < 1e-12

    def test_dimension_mismatch_names_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            ndcore.matmul(np.zeros((2, 3)), np.zeros((2, 2)))


class TestActivations:
    def test_sigmoid_zero(self):
        assert ndcore.sigmoid(np.zeros((1, 1)))[0, 0] == 0.5

    def test_tanh_zero(self):
        assert ndcore.tanh(np.zeros((1, 1)))[0, 0] == 0.0

    def test_sigmoid_large_input_stable(self):
        # stable-form oracle: for x >= 0, sigma = 1 / (1 + exp(-x))
        with np.errstate(over="raise"):
            val = ndcore.sigmoid(np.array([1000.0]))
        assert abs(val[0] - 1.0) < 1e-12
        assert 0.0 < ndcore.sigmoid(np.array([-1000.0]))[0] < 1e-300 or \
            ndcore.sigmoid(np.array([-1000.0]))[0] == 0.0

    def test_sigmoid_matches_plain_form_in_safe_range(self):
        x = Rng(0).uniform(-700, 700, (100,))
        plain = 1.0 / (1.0 + np.exp(-x))
        assert np.abs(ndcore.sigmoid(x) - plain).max() < 1e-15

    def test_ranges(self):
        x = Rng(1).normal((50, 3), 0, 10)
        s = ndcore.sigmoid(np.clip(x, -30, 30))  # strict bounds representable here
        assert ((s > 0) & (s < 1)).all()
        t = ndcore.tanh(x * 10)
        assert ((t >= -1) & (t <= 1)).all()


class TestSoftmax:
    def test_uniform_cases(self):
        assert np.allclose(ndcore.softmax(np.array([0.0, 0.0])), [0.5, 0.5])
        out = ndcore.softmax(np.array([3.7, 3.7, 3.7]))
        assert np.abs(out - 1.0 / 3.0).max() < 1e-15

    def test_shift_invariance(self):
        v = np.array([0.3, -1.2, 2.0])
        assert np.allclose(ndcore.softmax(v), ndcore.softmax(v + 123.4), atol=1e-12)

    def test_large_gap_no_overflow(self):
        # log-sum-exp oracle: exp(1000-1000) / (exp(0) + exp(-1000)) -> 1
        with np.errstate(over="raise"):
            out = ndcore.softmax(np.array([1000.0, 0.0]))
        assert abs(out[0] - 1.0) < 1e-12
        assert out[1] >= 0.0

    def test_sums_to_one(self):
        rng = Rng(2)
        for _ in range(20):
            v = rng.normal((int(rng.integers(1, 9)),), 0, 50)
            assert abs(ndcore.softmax(v).sum() - 1.0) < 1e-12

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            ndcore.softmax(np.array([]))


class TestMseLoss:
    def test_identical_inputs(self):
        x = Rng(3).normal((3, 4))
        loss, grad = ndcore.mse_loss(x, x)
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros_like(x))

    def test_hand_check(self):
        loss, grad = ndcore.mse_loss(np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]]))
        assert loss == 5.0
        assert np.array_equal(grad, [[2.0, 4.0]])

    def test_gradient_vs_finite_differences(self):
        rng = Rng(4)
        pred = rng.normal((3, 3))
        target = rng.normal((3, 3))
        _, grad = ndcore.mse_loss(pred, target)
        numeric = ndcore.finite_diff_grad(lambda p: ndcore.mse_loss(p, target)[0], pred)
        assert ndcore.rel_error(grad, numeric) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ndcore.mse_loss(np.zeros((2, 2)), np.zeros((2, 3)))


class TestFiniteDiff:
    def test_sum_of_squares(self):
        grad = ndcore.finite_diff_grad(lambda m: float((m * m).sum()), np.array([[3.0]]))
        assert abs(grad[0, 0] - 6.0) < 1e-6

    def test_constant_function(self):
        grad = ndcore.finite_diff_grad(lambda m: 1.25, Rng(0).normal((2, 3)))
        assert np.array_equal(grad, np.zeros((2, 3)))

    def test_sigmoid_derivative_at_zero(self):
        grad = ndcore.finite_diff_grad(
            lambda m: float(ndcore.sigmoid(m).sum()), np.array([[0.0]])
        )
        assert abs(grad[0, 0] - 0.25) < 1e-6

    def test_non_finite_evaluation_errors(self):
        with pytest.raises(ValueError, match="non-finite"):
            ndcore.finite_diff_grad(lambda m: float("nan"), np.array([[1.0]]))


class TestRngAndGaussian:
    def test_same_seed_same_draws(self):
        a = ndcore.gaussian(Rng(99), 4, 5)
        b = ndcore.gaussian(Rng(99), 4, 5)
        assert np.array_equal(a, b)

    def test_child_streams_are_independent_of_consumption(self):
        r1 = Rng(7)
        r1.normal((100,))
        a = r1.child(3).normal((5,))
        b = Rng(7).child(3).normal((5,))
        assert np.array_equal(a, b)

    def test_zero_std_is_constant(self):
        out = ndcore.gaussian(Rng(0), 3, 3, mean=0.0, std=0.0)
        assert np.array_equal(out, np.zeros((3, 3)))
        out = ndcore.gaussian(Rng(0), 2, 2, mean=1.5, std=0.0)
        assert np.array_equal(out, np.full((2, 2), 1.5))

    def test_law_of_large_numbers(self):
        draws = ndcore.gaussian(Rng(123), 1000, 100)
        assert abs(draws.mean()) < 0.02
        assert abs(draws.std() - 1.0) < 0.02

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError):
            ndcore.gaussian(Rng(0), 2, 2, std=-1.0)
