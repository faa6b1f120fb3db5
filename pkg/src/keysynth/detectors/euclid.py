from __future__ import annotations

import numpy as np


class EuclideanTemplate:
    """Distance-to-human-template baseline.

    The template is the mean human training vector. The decision threshold
    sits halfway between the mean template distance of the human and of the
    bot training vectors; samples on the bot side of it are flagged.
    """

    def __init__(self, template, threshold: float, sign: float):
        self.template = np.asarray(template, dtype=np.float64)
        self.threshold = float(threshold)
        self.sign = float(sign)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> "EuclideanTemplate":
        template = X[y == 0].mean(axis=0)
        d = np.linalg.norm(X - template, axis=1)
        d_human, d_bot = d[y == 0].mean(), d[y == 1].mean()
        # bots are normally farther from the human template; flip if they are not
        sign = 1.0 if d_bot >= d_human else -1.0
        return cls(template, 0.5 * (d_human + d_bot), sign)

    def distance(self, X: np.ndarray) -> np.ndarray:
        return np.linalg.norm(X - self.template, axis=1)

    def score(self, X: np.ndarray) -> np.ndarray:
        return self.sign * (self.distance(X) - self.threshold)

    def state(self) -> dict:
        return {"template": self.template, "threshold": self.threshold, "sign": self.sign}

    @classmethod
    def from_state(cls, d: dict) -> "EuclideanTemplate":
        return cls(d["template"], d["threshold"], d["sign"])
