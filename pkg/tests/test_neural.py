from __future__ import annotations

import numpy as np
import pytest
from gradcheck import max_rel_error
from hypothesis import given, settings
from hypothesis import strategies as st

from keysynth.errors import NumericalError, ShapeError
from keysynth.neural import (
    Adam,
    Dense,
    LstmCell,
    Sequential,
    adam_step,
    backprop_grads,
    dense_forward,
    lstm_forward,
    sigmoid,
    softplus,
)


def squared_loss(target):
    def fn(out):
        d = out - target
        return float(np.sum(d * d)), 2 * d

    return fn


# -- dense -----------------------------------------------------------------------------


def test_identity_layer():
    layer = Dense(np.eye(2), np.zeros(2), "linear")
    np.testing.assert_array_equal(dense_forward(layer, [1.0, 2.0]), [1.0, 2.0])


def test_zero_tanh_layer():
    layer = Dense(np.zeros((3, 2)), np.zeros(3), "tanh")
    np.testing.assert_array_equal(dense_forward(layer, [5.0, -7.0]), np.zeros(3))


@pytest.mark.parametrize("act", ["linear", "tanh", "softplus", "sigmoid"])
def test_dense_matches_double_loop(act):
    rng = np.random.default_rng(0)
    layer = Dense.init(7, 5, act, rng)
    layer.biases[:] = rng.normal(size=5)
    x = rng.normal(size=7)
    f = {"linear": lambda z: z, "tanh": np.tanh, "softplus": lambda z: np.log1p(np.exp(z)), "sigmoid": lambda z: 1 / (1 + np.exp(-z))}[act]
    want = np.empty(5)
    for o in range(5):
        z = layer.biases[o]
        for i in range(7):
            z += layer.weights[o, i] * x[i]
        want[o] = f(z)
    np.testing.assert_allclose(dense_forward(layer, x), want, rtol=1e-12, atol=1e-14)


def test_dense_shape_error():
    with pytest.raises(ShapeError):
        dense_forward(Dense.init(3, 2, "tanh", np.random.default_rng(0)), np.ones(4))
    with pytest.raises(ShapeError):
        Dense(np.zeros((2, 3)), np.zeros(3))


def test_single_linear_unit_gradient():
    w, b, x, t = np.array([[0.5, -1.0]]), np.array([0.2]), np.array([2.0, 3.0]), 1.0
    unit = Dense(w.copy(), b.copy(), "linear")
    _, (gw, gb) = backprop_grads(unit, x, squared_loss(np.array([t])))
    pred = w @ x + b
    np.testing.assert_allclose(gw, 2 * (pred - t)[:, None] * x[None])
    np.testing.assert_allclose(gb, 2 * (pred - t))


def test_constant_loss_has_zero_gradients():
    rng = np.random.default_rng(1)
    net = Sequential([Dense.init(3, 4, "tanh", rng), Dense.init(4, 2, "softplus", rng)])
    _, grads = backprop_grads(net, rng.normal(size=(5, 3)), lambda out: (3.0, np.zeros_like(out)))
    assert all(np.all(g == 0) for g in grads)


def test_non_finite_raises():
    net = Dense(np.array([[np.inf]]), np.zeros(1), "linear")
    with pytest.raises(NumericalError):
        backprop_grads(net, np.ones(1), squared_loss(np.zeros(1)))


@pytest.mark.parametrize("act", ["linear", "tanh", "softplus", "sigmoid"])
def test_dense_finite_differences(act):
    rng = np.random.default_rng(2)
    layer = Dense.init(4, 3, act, rng)
    layer.biases[:] = rng.normal(size=3)
    x, target = rng.normal(size=(6, 4)), rng.normal(size=(6, 3))
    loss_fn = squared_loss(target)
    _, grads = backprop_grads(layer, x, loss_fn)
    err = max_rel_error(layer.params, lambda: loss_fn(layer.forward(x))[0], grads, rng)
    assert err < 1e-4


def test_mlp_finite_differences():
    rng = np.random.default_rng(3)
    net = Sequential([Dense.init(3, 8, "tanh", rng), Dense.init(8, 8, "tanh", rng), Dense.init(8, 2, "linear", rng)])
    x, target = rng.normal(size=(10, 3)), rng.normal(size=(10, 2))
    loss_fn = squared_loss(target)
    _, grads = backprop_grads(net, x, loss_fn)
    assert max_rel_error(net.params, lambda: loss_fn(net.forward(x))[0], grads, rng) < 1e-4


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**31))
def test_mlp_gradients_on_random_shapes(n_in, hidden, n_out, seed):
    rng = np.random.default_rng(seed)
    net = Sequential([Dense.init(n_in, hidden, "tanh", rng), Dense.init(hidden, n_out, "softplus", rng)])
    x, target = rng.normal(size=(4, n_in)), rng.normal(size=(4, n_out))
    loss_fn = squared_loss(target)
    _, grads = backprop_grads(net, x, loss_fn)
    assert max_rel_error(net.params, lambda: loss_fn(net.forward(x))[0], grads, rng) < 1e-4


def test_softplus_positive_and_sigmoid_stable():
    z = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    assert np.all(softplus(z) > 0)
    s = sigmoid(z)
    assert np.all(np.isfinite(s)) and s[0] == 0.0 and s[-1] == 1.0 and s[2] == 0.5


# -- LSTM ----------------------------------------------------------------------------------


def test_zero_lstm_stays_zero():
    cell = LstmCell(np.zeros((3 + 4, 16)), np.zeros(16), 4)
    xs = np.random.default_rng(0).normal(size=(9, 3))
    np.testing.assert_array_equal(lstm_forward(cell, xs), np.zeros(4))


def test_one_step_closed_form():
    rng = np.random.default_rng(4)
    n_in, H = 3, 2
    cell = LstmCell.init(n_in, H, rng)
    cell.biases[:] = rng.normal(size=4 * H)
    x = rng.normal(size=n_in)
    sig = lambda v: 1 / (1 + np.exp(-v))
    Wx = cell.weights[:n_in]
    # h0 = c0 = 0, so only the input rows contribute
    i = sig(x @ Wx[:, :H] + cell.biases[:H])
    o = sig(x @ Wx[:, 2 * H : 3 * H] + cell.biases[2 * H : 3 * H])
    g = np.tanh(x @ Wx[:, 3 * H :] + cell.biases[3 * H :])
    c = i * g
    np.testing.assert_allclose(lstm_forward(cell, x[None]), o * np.tanh(c), rtol=1e-12)


def test_lstm_batch_matches_single():
    rng = np.random.default_rng(5)
    cell = LstmCell.init(2, 3, rng)
    xs = rng.normal(size=(4, 6, 2))
    batch = cell.forward(xs)
    for k in range(4):
        np.testing.assert_allclose(cell.forward(xs[k]), batch[k], rtol=1e-13)


def test_lstm_finite_differences():
    rng = np.random.default_rng(6)
    cell = LstmCell.init(3, 4, rng)
    cell.biases[:] = rng.normal(scale=0.5, size=16)
    xs, target = rng.normal(size=(5, 7, 3)), rng.normal(size=(5, 4))
    loss_fn = squared_loss(target)
    _, grads = backprop_grads(cell, xs, loss_fn)
    assert max_rel_error(cell.params, lambda: loss_fn(cell.forward(xs))[0], grads, rng) < 1e-4


def test_lstm_input_gradient():
    rng = np.random.default_rng(7)
    cell = LstmCell.init(2, 3, rng)
    xs, target = rng.normal(size=(2, 5, 2)), rng.normal(size=(2, 3))
    loss_fn = squared_loss(target)
    cell.zero_grad()
    _, d = loss_fn(cell.forward(xs))
    dxs = cell.backward(d)
    assert max_rel_error([xs], lambda: loss_fn(cell.forward(xs))[0], [dxs], rng, probes=20) < 1e-4


def test_lstm_shape_error():
    cell = LstmCell.init(2, 3, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        cell.forward(np.ones((4, 5, 3)))


# -- Adam --------------------------------------------------------------------------------


def test_adam_zero_gradient():
    p = np.array([1.0, -2.0])
    opt = Adam([p], lr=0.1)
    adam_step(opt, [p], [np.zeros(2)])
    np.testing.assert_array_equal(p, [1.0, -2.0])


@pytest.mark.parametrize("g", [1e-3, 0.5, 40.0, -7.0])
def test_adam_first_step_magnitude(g):
    p = np.zeros(1)
    opt = Adam([p], lr=0.01)
    opt.step([p], [np.array([g])])
    # bias correction makes the first step lr * g / (|g| + eps)
    assert p[0] == pytest.approx(-0.01 * np.sign(g), rel=1e-5)


def test_adam_opposite_gradients_bounded_drift():
    p = np.zeros(1)
    opt = Adam([p], lr=0.01)
    opt.step([p], [np.array([2.0])])
    opt.step([p], [np.array([-2.0])])
    # replay both bias-corrected updates by hand
    first = -0.01 * 2.0 / (2.0 + 1e-8)
    m_hat = (0.9 * 0.1 * 2.0 - 0.1 * 2.0) / (1 - 0.9**2)
    v_hat = (0.999 * 0.001 * 4 + 0.001 * 4) / (1 - 0.999**2)
    want = first - 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert p[0] == pytest.approx(want, rel=1e-9)
    assert abs(p[0]) <= 0.01


def test_adam_shape_mismatch():
    p = np.zeros(2)
    opt = Adam([p])
    with pytest.raises(ShapeError):
        opt.step([p], [np.zeros(3)])


def test_serialization_round_trip():
    rng = np.random.default_rng(8)
    d = Dense.init(3, 2, "softplus", rng)
    c = LstmCell.init(2, 3, rng)
    x = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(Dense.from_dict(d.to_dict()).forward(x), d.forward(x))
    xs = rng.normal(size=(2, 5, 2))
    np.testing.assert_array_equal(LstmCell.from_dict(c.to_dict()).forward(xs), c.forward(xs))
