"""The small neural toolkit: dense layers, an LSTM cell and Adam."""
from __future__ import annotations

import numpy as np

from keysynth.neural import Adam, Dense, LstmCell, Sequential, backprop_grads

rng = np.random.default_rng(0)

# Fit y = sin(3x) with a two-layer tanh network.
x = rng.uniform(-1, 1, (256, 1))
y = np.sin(3 * x)
net = Sequential([Dense.init(1, 32, "tanh", rng), Dense.init(32, 1, "linear", rng)])
opt = Adam(net.params, lr=1e-2)


def mse(out):
    d = out - y
    return float(np.mean(d * d)), 2 * d / d.size


for step in range(1501):
    loss, grads = backprop_grads(net, x, mse)
    opt.step(net.params, grads)
    if step % 500 == 0:
        print(f"step {step:4d}  mse {loss:.5f}")

# An LSTM cell reads a sequence and returns its last hidden state.
# Train it, with a linear read-out, to report whether a sequence sums above zero.
cell = LstmCell.init(1, 8, rng)
head = Dense.init(8, 1, "sigmoid", rng)
params = [*cell.params, *head.params]
opt = Adam(params, lr=1e-2)
seqs = rng.normal(size=(512, 10, 1))
target = (seqs.sum(axis=(1, 2)) > 0).astype(float)[:, None]
for epoch in range(60):
    cell.zero_grad()
    head.zero_grad()
    p = head.forward(cell.forward(seqs))
    # binary cross-entropy through the sigmoid output
    dp = (p - target) / (p * (1 - p) + 1e-12) / len(p)
    cell.backward(head.backward(dp))
    opt.step(params, [*cell.grads, *head.grads])
acc = np.mean((head.forward(cell.forward(seqs)) > 0.5) == target)
print(f"LSTM sign-of-sum accuracy: {acc:.3f}")
