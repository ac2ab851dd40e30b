import numpy as np
import pytest

from satforgery.losses import (
    BCE_EPS,
    bce_loss,
    bce_loss_grad,
    mse_loss,
    mse_loss_grad,
)


class TestMse:
    def test_zero_iff_equal(self, rng):
        x = rng.normal(size=(2, 4, 4, 3))
        assert mse_loss(x, x.copy()) == 0.0
        assert mse_loss(x, x + 0.1) > 0.0

    def test_unit_difference(self, rng):
        x = rng.normal(size=(2, 3, 3, 1))
        assert mse_loss(x + 1.0, x) == pytest.approx(1.0)

    def test_matches_two_pass_oracle(self, rng):
        a = rng.normal(size=(3, 5, 5, 2))
        b = rng.normal(size=(3, 5, 5, 2))
        ref = sum((float(u) - float(v)) ** 2
                  for u, v in zip(a.reshape(-1), b.reshape(-1))) / a.size
        assert mse_loss(a, b) == pytest.approx(ref, abs=1e-12)

    def test_grad_definition(self, rng):
        a = rng.normal(size=(2, 2, 2, 2))
        b = rng.normal(size=(2, 2, 2, 2))
        np.testing.assert_allclose(mse_loss_grad(a, b),
                                   2.0 * (a - b) / a.size)

    def test_shape_mismatch_raises(self, rng):
        with pytest.raises(ValueError):
            mse_loss(rng.normal(size=(1, 2, 2, 1)), rng.normal(size=(1, 2, 2, 2)))


class TestBce:
    def test_half_probability_is_ln2(self):
        p = np.full(8, 0.5)
        y = np.r_[np.ones(4), np.zeros(4)]
        assert bce_loss(p, y) == pytest.approx(np.log(2.0))

    def test_perfect_prediction_clamp_floor(self):
        y = np.array([1.0, 0.0, 1.0])
        assert bce_loss(y, y) <= -np.log1p(-BCE_EPS) + 1e-12

    def test_matches_direct_summation(self, rng):
        p = rng.uniform(0.01, 0.99, size=64)
        y = rng.integers(0, 2, size=64).astype(float)
        ref = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert bce_loss(p, y) == pytest.approx(ref, abs=1e-12)

    def test_grad_finite_differences(self, rng):
        p = rng.uniform(0.05, 0.95, size=16)
        y = rng.integers(0, 2, size=16).astype(float)
        g = bce_loss_grad(p, y)
        eps = 1e-7
        for i in range(16):
            pp, pm = p.copy(), p.copy()
            pp[i] += eps
            pm[i] -= eps
            num = (bce_loss(pp, y) - bce_loss(pm, y)) / (2 * eps)
            assert g[i] == pytest.approx(num, rel=1e-4)

    def test_grad_zero_where_clamped(self):
        p = np.array([0.0, 1.0, 0.5])
        g = bce_loss_grad(p, np.array([0.0, 1.0, 1.0]))
        assert g[0] == 0.0 and g[1] == 0.0 and g[2] != 0.0

    def test_empty_batch_raises(self):
        with pytest.raises(ValueError):
            bce_loss(np.array([]), np.array([]))
