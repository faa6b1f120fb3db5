from __future__ import annotations

import math

import numpy as np

from ..errors import TrainingDiverged
from ..neural import Adam, Dense, LstmCell, sigmoid


def bce_with_logits(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient with respect to the logits."""
    loss = np.logaddexp(0.0, logits) - y * logits
    return float(loss.mean()), (sigmoid(logits) - y) / len(y)


class LstmClassifier:
    """One LSTM layer over the step sequence, then a sigmoid unit on the last hidden state."""

    def __init__(self, cell: LstmCell, head: Dense, step_width: int):
        self.cell = cell
        self.head = head
        self.step_width = int(step_width)

    @classmethod
    def init(cls, step_width: int, hidden: int, rng: np.random.Generator) -> "LstmClassifier":
        return cls(LstmCell.init(step_width, hidden, rng), Dense.init(hidden, 1, "linear", rng), step_width)

    @property
    def layers(self):
        return [self.cell, self.head]

    @property
    def params(self):
        return [*self.cell.params, *self.head.params]

    @property
    def grads(self):
        return [*self.cell.grads, *self.head.grads]

    def zero_grad(self):
        self.cell.zero_grad()
        self.head.zero_grad()

    def _seq(self, X: np.ndarray) -> np.ndarray:
        return X.reshape(len(X), -1, self.step_width)

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Logits for flattened step vectors."""
        return self.head.forward(self.cell.forward(self._seq(X)))[:, 0]

    def backward(self, dlogits: np.ndarray) -> None:
        self.cell.backward(self.head.backward(dlogits[:, None]))

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
        self.zero_grad()
        loss, dlogits = bce_with_logits(self.forward(X), y)
        self.backward(dlogits)
        return loss, self.grads

    def score(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.forward(X))

    def fit(self, X, y, epochs: int, batch: int, lr: float, rng: np.random.Generator) -> list[float]:
        y = np.asarray(y, dtype=np.float64)
        opt = Adam(self.params, lr=lr)
        history = []
        for epoch in range(epochs):
            order = rng.permutation(len(X))
            total = 0.0
            for start in range(0, len(X), batch):
                idx = order[start : start + batch]
                loss, grads = self.loss_and_grads(X[idx], y[idx])
                opt.step(self.params, grads)
                total += loss * len(idx)
            mean = total / len(X)
            if not math.isfinite(mean):
                raise TrainingDiverged(f"LSTM loss became non-finite at epoch {epoch}")
            history.append(mean)
        return history

    def state(self) -> dict:
        return {"cell": self.cell.to_dict(), "head": self.head.to_dict(), "step_width": self.step_width}

    @classmethod
    def from_state(cls, d: dict) -> "LstmClassifier":
        return cls(LstmCell.from_dict(d["cell"]), Dense.from_dict(d["head"]), d["step_width"])
