import numpy as np
import pytest

from satforgery.layers import ShapeError
from satforgery.optim import OptimizerState, adam_step, sgd_step


class TestAdam:
    def test_zero_gradient_keeps_params(self, rng):
        state = OptimizerState("adam", 0.01)
        params = {"w": rng.normal(size=(3, 3))}
        out = adam_step(state, params, {"w": np.zeros((3, 3))})
        np.testing.assert_array_equal(out["w"], params["w"])

    def test_first_step_is_lr_times_sign(self, rng):
        state = OptimizerState("adam", 0.05)
        params = {"w": np.zeros(5)}
        g = rng.normal(size=5)
        out = adam_step(state, params, {"w": g})
        # bias-corrected moments cancel the magnitude on step 1
        np.testing.assert_allclose(out["w"], -0.05 * np.sign(g), rtol=1e-6)

    def test_descends_quadratic(self):
        state = OptimizerState("adam", 0.1)
        params = {"x": np.array([1.0])}
        history = [abs(params["x"][0])]
        for _ in range(10):
            params = adam_step(state, params, {"x": 2.0 * params["x"]})
            history.append(abs(params["x"][0]))
        assert all(b < a for a, b in zip(history, history[1:]))

    def test_step_counter_increments(self, rng):
        state = OptimizerState("adam", 0.01)
        params = {"w": rng.normal(size=2)}
        for expected in (1, 2, 3):
            params = adam_step(state, params, {"w": rng.normal(size=2)})
            assert state.step == expected

    def test_second_moments_nonnegative(self, rng):
        state = OptimizerState("adam", 0.01)
        params = {"w": rng.normal(size=4)}
        adam_step(state, params, {"w": rng.normal(size=4)})
        assert (state.v["w"] >= 0).all()

    def test_shape_mismatch_raises(self, rng):
        state = OptimizerState("adam", 0.01)
        with pytest.raises(ShapeError):
            adam_step(state, {"w": np.zeros(3)}, {"w": np.zeros(4)})

    def test_deterministic(self, rng):
        g = rng.normal(size=3)
        results = []
        for _ in range(2):
            state = OptimizerState("adam", 0.01)
            out = adam_step(state, {"w": np.ones(3)}, {"w": g.copy()})
            results.append(out["w"])
        np.testing.assert_array_equal(results[0], results[1])


class TestSgd:
    def test_definition(self):
        state = OptimizerState("sgd", 0.001)
        out = sgd_step(state, {"w": np.array([0.5])}, {"w": np.array([1.0])})
        assert out["w"][0] == pytest.approx(0.499)

    def test_zero_gradient_keeps_params(self, rng):
        state = OptimizerState("sgd", 0.1)
        params = {"w": rng.normal(size=3)}
        out = sgd_step(state, params, {"w": np.zeros(3)})
        np.testing.assert_array_equal(out["w"], params["w"])

    def test_matches_manual_update(self, rng):
        state = OptimizerState("sgd", 0.02)
        p = rng.normal(size=(2, 3))
        g = rng.normal(size=(2, 3))
        out = sgd_step(state, {"w": p}, {"w": g})
        np.testing.assert_array_equal(out["w"], p - 0.02 * g)

    def test_wrong_kind_raises(self):
        with pytest.raises(ValueError):
            sgd_step(OptimizerState("adam", 0.1), {}, {})
        with pytest.raises(ValueError):
            adam_step(OptimizerState("sgd", 0.1), {}, {})


class TestState:
    def test_invalid_kind_rejected(self):
        with pytest.raises(ValueError):
            OptimizerState("rmsprop", 0.01)

    def test_nonpositive_lr_rejected(self):
        with pytest.raises(ValueError):
            OptimizerState("adam", 0.0)
