"""Human-vs-bot detectors over truncated, vectorized keystroke samples.

Every detector produces a bot-confidence score; a sample is labelled bot
(1) only when the score is strictly above the kind's cutoff, so exact ties
resolve to human (0).

=========  ===========================================  ======
kind       score                                         cutoff
=========  ===========================================  ======
ocsvm      negated one-class decision value              0
svm        C-SVM decision value                          0
gnb        posterior probability of bot                  0.5
rf         fraction of trees voting bot                  0.5
lstm       sigmoid output                                0.5
euclid     distance to human template minus threshold    0
=========  ===========================================  ======
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .base import (
    BOT,
    HUMAN,
    KINDS,
    STANDARDIZED,
    DetectorConfig,
    Standardizer,
    accuracy_score,
    check_training_set,
    drop_key_codes,
    step_width,
    vectorize,
    vectorize_many,
)
from .bayes import GaussianNB
from .euclid import EuclideanTemplate
from .forest import Forest
from .lstm import LstmClassifier
from .svm import KernelMachine, fit_one_class, fit_svc, kkt_violation

CUTOFFS = {"ocsvm": 0.0, "svm": 0.0, "gnb": 0.5, "rf": 0.5, "lstm": 0.5, "euclid": 0.0}
IMPLS = {
    "ocsvm": KernelMachine,
    "svm": KernelMachine,
    "gnb": GaussianNB,
    "rf": Forest,
    "lstm": LstmClassifier,
    "euclid": EuclideanTemplate,
}


@dataclass(eq=False)
class DetectorModel:
    kind: str
    impl: object
    dim: int
    step_width: int
    scaler: Standardizer | None = None
    config: DetectorConfig = field(default_factory=DetectorConfig)
    diagnostics: dict = field(default_factory=dict)

    def _prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ShapeError(f"expected vectors of length {self.dim}, got shape {X.shape}")
        return self.scaler(X) if self.scaler is not None else X

    def score(self, X) -> np.ndarray:
        return self.impl.score(self._prepare(X))

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        s = self.score(X)
        return (s > CUTOFFS[self.kind]).astype(np.int64), s

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "step_width": self.step_width,
            "scaler": None if self.scaler is None else {"mean": self.scaler.mean, "std": self.scaler.std},
            "config": self.config.to_dict(),
            "state": self.impl.state(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorModel":
        sc = d["scaler"]
        return cls(
            d["kind"],
            IMPLS[d["kind"]].from_state(d["state"]),
            int(d["dim"]),
            int(d["step_width"]),
            None if sc is None else Standardizer(np.asarray(sc["mean"]), np.asarray(sc["std"])),
            DetectorConfig.from_dict(d["config"]),
        )


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def fit_detector(
    kind: str,
    X,
    y=None,
    config: DetectorConfig | None = None,
    rng=0,
    step_width: int | None = None,
) -> DetectorModel:
    """Fit one detector on row vectors ``X`` with labels ``y`` (0 human, 1 bot).

    ``step_width`` (4 or 5) is only needed by the LSTM to reshape flattened
    vectors into steps; it is inferred from the dimension when omitted.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown detector kind {kind!r}; choose from {KINDS}")
    config = config or DetectorConfig()
    rng = _as_rng(rng)
    X = np.asarray(X, dtype=np.float64)
    y = np.zeros(len(X), dtype=np.int64) if y is None else np.asarray(y, dtype=np.int64)
    check_training_set(kind, X, y)
    dim = X.shape[1]
    if step_width is None:
        step_width = 5 if dim % 5 == 0 and dim % 4 != 0 else 4
    if dim % step_width:
        raise ShapeError(f"dimension {dim} is not a multiple of step width {step_width}")

    scaler = Standardizer.fit(X) if kind in STANDARDIZED else None
    Z = scaler(X) if scaler is not None else X
    gamma = config.gamma if config.gamma is not None else 1.0 / dim
    diagnostics: dict = {}

    if kind == "svm":
        impl, alpha = fit_svc(Z, y, config.svm_C, gamma, config.svm_tol, config.svm_cache_mb)
        diagnostics["kkt"], diagnostics["box"] = kkt_violation(Z, y, alpha, impl, config.svm_C)
    elif kind == "ocsvm":
        impl, alpha = fit_one_class(Z, config.ocsvm_nu, gamma, config.svm_tol, config.svm_cache_mb)
        diagnostics["kkt"], diagnostics["box"] = kkt_violation(Z, None, alpha, impl, 1.0)
    elif kind == "gnb":
        impl = GaussianNB.fit(Z, y, config.gnb_var_floor)
    elif kind == "rf":
        seed = int(rng.integers(0, 2**31 - 1))
        impl = Forest.fit(Z, y, config.rf_trees, config.rf_max_depth, config.rf_max_features, seed)
    elif kind == "lstm":
        impl = LstmClassifier.init(step_width, config.lstm_hidden, rng)
        diagnostics["loss"] = impl.fit(Z, y, config.lstm_epochs_for(len(Z)), config.lstm_batch, config.lstm_lr, rng)
    else:
        impl = EuclideanTemplate.fit(Z, y)
    return DetectorModel(kind, impl, dim, step_width, scaler, config, diagnostics)


def predict(model: DetectorModel, v):
    """Label and score for one vector (returns scalars) or a batch (returns arrays)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        labels, scores = model.predict(v[None])
        return int(labels[0]), float(scores[0])
    return model.predict(v)


def accuracy(model: DetectorModel, X, y) -> float:
    y = np.asarray(y)
    if y.size == 0:
        return accuracy_score(np.empty(0), y)
    labels, _ = model.predict(X)
    return accuracy_score(labels, y)


__all__ = [
    "BOT",
    "HUMAN",
    "KINDS",
    "CUTOFFS",
    "DetectorConfig",
    "DetectorModel",
    "Standardizer",
    "accuracy",
    "accuracy_score",
    "drop_key_codes",
    "fit_detector",
    "kkt_violation",
    "predict",
    "step_width",
    "vectorize",
    "vectorize_many",
]
