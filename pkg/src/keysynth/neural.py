"""Small numpy neural toolkit: dense layers, an LSTM layer and Adam.

Layers operate on batches (first axis) and cache what ``backward`` needs
from the most recent ``forward`` call. Gradients are accumulated into
``layer.grads`` in the same order as ``layer.params``.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, ShapeError

ACTIVATIONS = ("linear", "tanh", "softplus", "sigmoid")


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_TINY = np.finfo(np.float64).tiny


def softplus(z):
    # floored so very negative inputs stay strictly positive instead of underflowing to 0
    return np.maximum(np.logaddexp(0.0, z), _TINY)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "softplus":
        return softplus(z)
    if name == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(z)
    if name == "tanh":
        return 1.0 - a * a
    if name == "softplus":
        return sigmoid(z)
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


class Dense:
    """Fully-connected layer ``activation(x @ W.T + b)`` with ``W`` shaped (out, in)."""

    def __init__(self, weights, biases, activation: str = "linear"):
        self.weights = np.array(weights, dtype=np.float64, ndmin=2)
        self.biases = np.array(biases, dtype=np.float64).reshape(-1)
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ShapeError(f"weights {self.weights.shape} vs biases {self.biases.shape}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        self.grads = [np.zeros_like(self.weights), np.zeros_like(self.biases)]
        self._cache = None

    @classmethod
    def init(cls, n_in: int, n_out: int, activation: str, rng: np.random.Generator, scale=None):
        # Glorot-uniform
        lim = np.sqrt(6.0 / (n_in + n_out)) if scale is None else scale
        return cls(rng.uniform(-lim, lim, (n_out, n_in)), np.zeros(n_out), activation)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.biases]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"expected input dim {self.n_in}, got {x.shape[-1]}")
        z = x @ self.weights.T + self.biases
        a = _activate(self.activation, z)
        self._cache = (x, z, a)
        return a

    def backward(self, dout):
        x, z, a = self._cache
        dz = np.asarray(dout) * _activation_grad(self.activation, z, a)
        if x.ndim == 1:
            self.grads[0] += np.outer(dz, x)
            self.grads[1] += dz
        else:
            self.grads[0] += dz.T @ x
            self.grads[1] += dz.sum(axis=0)
        return dz @ self.weights

    def zero_grad(self):
        for g in self.grads:
            g.fill(0.0)

    def to_dict(self) -> dict:
        return {"weights": self.weights, "biases": self.biases, "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "Dense":
        return cls(d["weights"], d["biases"], d["activation"])


def dense_forward(layer: Dense, x) -> np.ndarray:
    return layer.forward(x)


class Sequential:
    def __init__(self, layers: Sequence):
        self.layers = list(layers)

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def backprop_grads(network, x, loss_fn: LossFn) -> tuple[float, list[np.ndarray]]:
    """Return ``(loss, grads)`` for ``loss_fn(network.forward(x))``.

    ``loss_fn`` maps the network output to the scalar loss and its gradient
    with respect to that output. The gradients are copies aligned with
    ``network.params``.
    """
    network.zero_grad()
    out = network.forward(x)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite network output")
    loss, dout = loss_fn(out)
    if not np.isfinite(loss) or not np.all(np.isfinite(dout)):
        raise NumericalError("non-finite loss or loss gradient")
    network.backward(dout)
    grads = [g.copy() for g in network.grads]
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericalError("non-finite parameter gradient")
    return float(loss), grads


class LstmCell:
    """Single LSTM layer returning the final hidden state.

    Gate pre-activations are ``[x, h] @ W + b`` split as input, forget,
    output, candidate blocks of width ``hidden``.
    """

    def __init__(self, weights, biases, hidden: int):
        self.hidden = int(hidden)
        self.weights = np.array(weights, dtype=np.float64)
        self.biases = np.array(biases, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2 or self.weights.shape[1] != 4 * self.hidden:
            raise ShapeError(f"weights must be (in + hidden, {4 * self.hidden}), got {self.weights.shape}")
        if self.biases.shape != (4 * self.hidden,):
            raise ShapeError(f"biases must have length {4 * self.hidden}")
        if self.weights.shape[0] <= self.hidden:
            raise ShapeError("weights have no input rows")
        self.grads = [np.zeros_like(self.weights), np.zeros_like(self.biases)]
        self._cache = None

    @classmethod
    def init(cls, n_in: int, hidden: int, rng: np.random.Generator, forget_bias: float = 1.0):
        lim = 1.0 / np.sqrt(hidden)
        w = rng.uniform(-lim, lim, (n_in + hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = forget_bias
        return cls(w, b, hidden)

    @property
    def n_in(self) -> int:
        return self.weights.shape[0] - self.hidden

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.biases]

    def forward(self, xs):
        """``xs`` is (batch, T, n_in) or (T, n_in); returns the last hidden state."""
        xs = np.asarray(xs, dtype=np.float64)
        single = xs.ndim == 2
        if single:
            xs = xs[None]
        if xs.ndim != 3 or xs.shape[2] != self.n_in:
            raise ShapeError(f"expected (batch, T, {self.n_in}) input, got {xs.shape}")
        n, T, _ = xs.shape
        H = self.hidden
        Wx, Wh = self.weights[: self.n_in], self.weights[self.n_in :]
        xw = xs @ Wx + self.biases
        h = np.zeros((n, H))
        c = np.zeros((n, H))
        gates = np.empty((T, n, 4 * H))
        cs = np.empty((T + 1, n, H))
        hs = np.empty((T + 1, n, H))
        cs[0], hs[0] = c, h
        for t in range(T):
            z = xw[:, t] + h @ Wh
            g = gates[t]
            g[:, : 3 * H] = sigmoid(z[:, : 3 * H])
            g[:, 3 * H :] = np.tanh(z[:, 3 * H :])
            c = g[:, H : 2 * H] * c + g[:, :H] * g[:, 3 * H :]
            h = g[:, 2 * H : 3 * H] * np.tanh(c)
            cs[t + 1], hs[t + 1] = c, h
        self._cache = (xs, gates, cs, hs, single)
        return h[0] if single else h

    def backward(self, dh_last):
        xs, gates, cs, hs, single = self._cache
        n, T, _ = xs.shape
        H = self.hidden
        Wh = self.weights[self.n_in :]
        dh = np.array(dh_last, dtype=np.float64).reshape(n, H)
        dc = np.zeros((n, H))
        dxs = np.empty_like(xs)
        dW = self.grads[0]
        dz = np.empty((n, 4 * H))
        inp = np.empty((n, self.n_in + H))
        for t in range(T - 1, -1, -1):
            g = gates[t]
            i, f, o, cand = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
            tc = np.tanh(cs[t + 1])
            dc = dc + dh * o * (1.0 - tc * tc)
            dz[:, :H] = dc * cand * i * (1.0 - i)
            dz[:, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
            dz[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
            dz[:, 3 * H :] = dc * i * (1.0 - cand * cand)
            inp[:, : self.n_in] = xs[:, t]
            inp[:, self.n_in :] = hs[t]
            dW += inp.T @ dz
            self.grads[1] += dz.sum(axis=0)
            dinp = dz @ self.weights.T
            dxs[:, t] = dinp[:, : self.n_in]
            dh = dinp[:, self.n_in :]
            dc = dc * f
        return dxs[0] if single else dxs

    def zero_grad(self):
        for g in self.grads:
            g.fill(0.0)

    def to_dict(self) -> dict:
        return {"weights": self.weights, "biases": self.biases, "hidden": self.hidden}

    @classmethod
    def from_dict(cls, d: dict) -> "LstmCell":
        return cls(d["weights"], d["biases"], int(d["hidden"]))


def lstm_forward(cell: LstmCell, sequence) -> np.ndarray:
    return cell.forward(sequence)


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, params: Sequence[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr=None):
        if len(params) != len(self.m):
            raise ShapeError("parameter list does not match optimizer state")
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


AdamState = Adam


def adam_step(state: Adam, params, grads, lr=None):
    return state.step(params, grads, lr)
