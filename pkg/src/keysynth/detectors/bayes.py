from __future__ import annotations

import numpy as np

from ..neural import sigmoid


class GaussianNB:
    """Per-class, per-dimension Gaussian likelihoods with class-frequency priors."""

    def __init__(self, means, variances, log_priors):
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        self.log_priors = np.asarray(log_priors, dtype=np.float64)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, var_floor: float) -> "GaussianNB":
        floor = var_floor * float(X.var(axis=0).max())
        means, variances, priors = [], [], []
        for label in (0, 1):
            Xc = X[y == label]
            means.append(Xc.mean(axis=0))
            variances.append(Xc.var(axis=0) + floor)
            priors.append(len(Xc) / len(X))
        return cls(means, variances, np.log(priors))

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        out = np.empty((len(X), 2))
        for c in (0, 1):
            var = self.variances[c]
            ll = -0.5 * (np.log(2.0 * np.pi * var) + (X - self.means[c]) ** 2 / var)
            out[:, c] = self.log_priors[c] + ll.sum(axis=1)
        return out

    def score(self, X: np.ndarray) -> np.ndarray:
        """Posterior probability of the bot class."""
        jll = self.joint_log_likelihood(X)
        return sigmoid(jll[:, 1] - jll[:, 0])

    def state(self) -> dict:
        return {"means": self.means, "variances": self.variances, "log_priors": self.log_priors}

    @classmethod
    def from_state(cls, d: dict) -> "GaussianNB":
        return cls(d["means"], d["variances"], d["log_priors"])
