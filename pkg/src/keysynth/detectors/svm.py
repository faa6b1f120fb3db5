"""RBF support vector detectors.

The dual problems are solved by libsvm's SMO solver (through scikit-learn);
only the support vectors, dual coefficients and offset are kept, and the
decision function is evaluated here. ``kkt_violation`` re-checks the
optimality conditions of the returned dual solution independently.
"""
from __future__ import annotations

import numpy as np
from sklearn.svm import SVC, OneClassSVM

from ..errors import NumericalError


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float, chunk: int = 2048) -> np.ndarray:
    bb = np.einsum("ij,ij->i", B, B)
    out = np.empty((len(A), len(B)))
    for i in range(0, len(A), chunk):
        a = A[i : i + chunk]
        d2 = np.einsum("ij,ij->i", a, a)[:, None] + bb[None, :] - 2.0 * a @ B.T
        np.maximum(d2, 0.0, out=d2)
        out[i : i + chunk] = np.exp(-gamma * d2)
    return out


class KernelMachine:
    """f(x) = sum_i coef_i K(sv_i, x) + offset."""

    def __init__(self, support: np.ndarray, coef: np.ndarray, offset: float, gamma: float, sign: float):
        self.support = np.asarray(support, dtype=np.float64)
        self.coef = np.asarray(coef, dtype=np.float64).reshape(-1)
        self.offset = float(offset)
        self.gamma = float(gamma)
        # +1: positive decision means bot; -1: positive decision means human
        self.sign = float(sign)

    def decision(self, X: np.ndarray) -> np.ndarray:
        if not len(self.support):
            return np.full(len(X), self.offset)
        return rbf_kernel(X, self.support, self.gamma) @ self.coef + self.offset

    def score(self, X: np.ndarray) -> np.ndarray:
        return self.sign * self.decision(X)

    def state(self) -> dict:
        return {"support": self.support, "coef": self.coef, "offset": self.offset, "gamma": self.gamma, "sign": self.sign}

    @classmethod
    def from_state(cls, d: dict) -> "KernelMachine":
        return cls(d["support"], d["coef"], d["offset"], d["gamma"], d["sign"])


def fit_svc(X: np.ndarray, y: np.ndarray, C: float, gamma: float, tol: float, cache_mb: float):
    clf = SVC(C=C, kernel="rbf", gamma=gamma, tol=tol, cache_size=cache_mb, shrinking=True)
    clf.fit(X, y)
    if list(clf.classes_) != [0, 1]:
        raise NumericalError(f"unexpected class order {clf.classes_}")
    # libsvm orients the decision toward classes_[1] (bot)
    machine = KernelMachine(clf.support_vectors_, clf.dual_coef_[0], clf.intercept_[0], gamma, +1.0)
    alpha = np.zeros(len(X))
    alpha[clf.support_] = np.abs(clf.dual_coef_[0])
    return machine, alpha


def fit_one_class(X: np.ndarray, nu: float, gamma: float, tol: float, cache_mb: float):
    clf = OneClassSVM(kernel="rbf", gamma=gamma, nu=nu, tol=tol, cache_size=cache_mb, shrinking=True)
    clf.fit(X)
    machine = KernelMachine(clf.support_vectors_, clf.dual_coef_[0], clf.intercept_[0], gamma, -1.0)
    alpha = np.zeros(len(X))
    alpha[clf.support_] = clf.dual_coef_[0]
    return machine, alpha


def kkt_violation(
    X: np.ndarray,
    y: np.ndarray | None,
    alpha: np.ndarray,
    machine: KernelMachine,
    upper: float,
) -> tuple[float, float]:
    """Largest KKT and box-constraint violations of a dual solution.

    ``y`` in {0, 1} for C-SVC (mapped to -1/+1), or None for the one-class
    problem, where the margin target is 0 instead of 1. ``upper`` is the
    box bound on each alpha (C, or 1 for libsvm's scaled one-class dual).
    """
    f = machine.decision(X)
    if y is None:
        m = f
        target = 0.0
    else:
        m = np.where(np.asarray(y) == 1, 1.0, -1.0) * f
        target = 1.0
    box = float(max(0.0, -alpha.min(), (alpha - upper).max()))
    tol = 1e-8 * max(upper, 1.0)
    at_zero = alpha <= tol
    at_upper = alpha >= upper - tol
    free = ~(at_zero | at_upper)
    viol = np.zeros(len(alpha))
    viol[at_zero] = np.maximum(target - m[at_zero], 0.0)
    viol[at_upper] = np.maximum(m[at_upper] - target, 0.0)
    viol[free] = np.abs(m[free] - target)
    return float(viol.max(initial=0.0)), box
