import math

import numpy as np
import pytest

from agff.errors import ShapeError
from agff.optim import AdamState, adam_step


def test_zero_gradient_leaves_parameters_unchanged():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    state = AdamState.init(params)
    adam_step(params, {"w": np.zeros(3)}, state, lr=0.1)
    assert np.array_equal(params["w"], [1.0, -2.0, 3.0])


def test_first_step_matches_direct_formula_evaluation():
    # independent evaluation of the update equations at t=1, scalar g=1
    beta1, beta2, eps, lr, g = 0.9, 0.999, 1e-8, 0.001, 1.0
    m = (1 - beta1) * g
    v = (1 - beta2) * g * g
    m_hat = m / (1 - beta1 ** 1)
    v_hat = v / (1 - beta2 ** 1)
    expected_delta = -lr * m_hat / (math.sqrt(v_hat) + eps)
    assert expected_delta == pytest.approx(-0.000999999990, abs=1e-12)

    params = {"w": np.array([0.5])}
    state = AdamState.init(params)
    adam_step(params, {"w": np.array([g])}, state, lr=lr)
    assert params["w"][0] == pytest.approx(0.5 + expected_delta, abs=1e-18)
    assert state.t == 1


def test_constant_gradient_step_magnitude_non_increasing():
    params = {"w": np.array([0.0])}
    state = AdamState.init(params)
    deltas = []
    prev = params["w"][0]
    for _ in range(25):
        adam_step(params, {"w": np.array([1.0])}, state, lr=0.01)
        deltas.append(abs(params["w"][0] - prev))
        prev = params["w"][0]
    for earlier, later in zip(deltas, deltas[1:]):
        assert later <= earlier + 1e-15


def test_identical_runs_are_bitwise_identical():
    def run():
        params = {"w": np.linspace(-1, 1, 8)}
        state = AdamState.init(params)
        for i in range(10):
            g = np.sin(np.arange(8) + i)
            adam_step(params, {"w": g}, state, lr=0.005)
        return params["w"]

    a, b = run(), run()
    assert a.tobytes() == b.tobytes()


def test_gradient_shape_mismatch():
    params = {"w": np.zeros((2, 2))}
    state = AdamState.init(params)
    with pytest.raises(ShapeError):
        adam_step(params, {"w": np.zeros(3)}, state, lr=0.01)
