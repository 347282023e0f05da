import numpy as np
import pytest

from cqbrain.errors import ShapeMismatch
from cqbrain.neuralkernel import (
    AdagradState,
    AdamState,
    RmspropState,
    SgdState,
    adagrad_step,
    adam_step,
    make_optimizer,
    rmsprop_step,
    sgd_step,
)


def _hand_adam(grads, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar reference iteration of the Adam recurrences (pure Python)."""
    m = v = 0.0
    theta = 0.0
    updates = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        step = lr * m_hat / (v_hat**0.5 + eps)
        theta -= step
        updates.append(step)
    return theta, updates


class TestAdam:
    def test_first_step_magnitude_and_direction(self):
        param = np.zeros(3, np.float32)
        grad = np.array([0.5, -2.0, 10.0], np.float32)
        state = AdamState.init(param, lr=1e-3)
        new_param, new_state = adam_step(param, grad, state)
        assert new_state.t == 1
        assert np.allclose(np.abs(new_param), 1e-3, rtol=1e-4)
        assert np.array_equal(np.sign(new_param), -np.sign(grad))

    def test_zero_gradient_leaves_param(self):
        param = np.array([1.0, 2.0], np.float32)
        new_param, _ = adam_step(param, np.zeros(2, np.float32), AdamState.init(param))
        assert np.array_equal(new_param, param)

    def test_two_identical_gradients_hand_iteration(self):
        _, updates = _hand_adam([0.7, 0.7])
        assert updates[1] <= updates[0] + 1e-12

        param = np.array([0.0], np.float32)
        state = AdamState.init(param)
        p1, state = adam_step(param, np.array([0.7], np.float32), state)
        p2, state = adam_step(p1, np.array([0.7], np.float32), state)
        first = abs(float(param[0] - p1[0]))
        second = abs(float(p1[0] - p2[0]))
        assert second <= first + 1e-9
        assert float(p2[0]) == pytest.approx(_hand_adam([0.7, 0.7])[0], rel=1e-5)

    def test_shape_mismatch(self):
        param = np.zeros(3, np.float32)
        with pytest.raises(ShapeMismatch):
            adam_step(param, np.zeros(4, np.float32), AdamState.init(param))


class TestOtherRules:
    def test_sgd_step(self):
        p, _ = sgd_step(np.array([1.0], np.float32), np.array([1.0], np.float32), SgdState(lr=0.1))
        assert p[0] == pytest.approx(0.9)

    def test_rmsprop_asymptotic_step_is_lr(self):
        # fixed point of v <- rho v + (1-rho) g^2 is v = g^2, so step -> lr
        param = np.array([0.0], np.float32)
        state = RmspropState.init(param, lr=0.01)
        g = np.array([3.0], np.float32)
        prev = param
        for _ in range(600):
            new, state = rmsprop_step(prev, g, state)
            step = abs(float(prev[0] - new[0]))
            prev = new
        assert step == pytest.approx(0.01, rel=1e-3)

    def test_adagrad_steps_shrink(self):
        param = np.array([0.0], np.float32)
        state = AdagradState.init(param, lr=0.5)
        g = np.array([1.5], np.float32)
        steps = []
        prev = param
        for _ in range(10):
            new, state = adagrad_step(prev, g, state)
            steps.append(abs(float(prev[0] - new[0])))
            prev = new
        assert all(b < a for a, b in zip(steps, steps[1:]))

    @pytest.mark.parametrize("name", ["adam", "sgd", "rmsprop", "adagrad"])
    def test_steps_preserve_shape_and_finiteness(self, name):
        rng = np.random.default_rng(42)
        params = {"a": rng.standard_normal((3, 4)).astype(np.float32),
                  "b": rng.standard_normal(5).astype(np.float32)}
        grads = {k: rng.standard_normal(v.shape).astype(np.float32) * 10 for k, v in params.items()}
        opt = make_optimizer(name, lr=1e-2)
        for _ in range(5):
            opt.step(params, grads)
        assert params["a"].shape == (3, 4) and params["b"].shape == (5,)
        assert all(np.isfinite(v).all() for v in params.values())

    def test_optimizer_is_deterministic(self):
        def run():
            params = {"w": np.ones(4, np.float32)}
            opt = make_optimizer("adam", lr=1e-3)
            for i in range(20):
                opt.step(params, {"w": np.full(4, 0.1 * (i + 1), np.float32)})
            return params["w"].copy()

        assert np.array_equal(run(), run())

    def test_unknown_optimizer_rejected(self):
        with pytest.raises(ValueError):
            make_optimizer("lbfgs")
