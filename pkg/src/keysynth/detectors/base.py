"""Vectorization, standardization and the shared detector model."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from ..errors import EmptyClass, EmptyEvalSet, ProtocolViolation, ShapeError
from ..features import N_TIME_FEATURES, FeatureSequence

HUMAN, BOT = 0, 1
KINDS = ("ocsvm", "svm", "gnb", "rf", "lstm", "euclid")
STANDARDIZED = {"ocsvm", "svm", "lstm", "euclid"}


@dataclass(frozen=True)
class DetectorConfig:
    svm_C: float = 1.0
    gamma: float | None = None  # None -> 1 / input dimension
    svm_tol: float = 1e-4
    svm_cache_mb: float = 500.0
    ocsvm_nu: float = 0.1
    rf_trees: int = 100
    rf_max_depth: int | None = None
    rf_max_features: str | int | float = "sqrt"
    gnb_var_floor: float = 1e-9
    lstm_hidden: int = 32
    lstm_epochs: int = 100
    lstm_batch: int = 64
    lstm_lr: float = 1e-3
    lstm_max_updates: int | None = None  # caps epochs so that epochs * batches <= this

    def lstm_epochs_for(self, n_samples: int) -> int:
        if self.lstm_max_updates is None:
            return self.lstm_epochs
        batches = max(1, -(-n_samples // self.lstm_batch))
        return max(1, min(self.lstm_epochs, self.lstm_max_updates // batches))

    @classmethod
    def from_dict(cls, d: dict | None) -> "DetectorConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown detector hyperparameters: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def step_width(use_keys: bool) -> int:
    return N_TIME_FEATURES + 1 if use_keys else N_TIME_FEATURES


def vectorize(fs: FeatureSequence, L: int, use_keys: bool) -> np.ndarray:
    """Flatten a truncated sample step by step: [f1, f2, f3, f4(, f5)] per step."""
    if fs.n_steps != L - 1:
        raise ShapeError(f"expected a sample truncated to {L} keys, got {fs.n_keys}")
    cols = fs.values if use_keys else fs.values[:, :N_TIME_FEATURES]
    return cols.reshape(-1).copy()


def vectorize_many(samples: Sequence[FeatureSequence], L: int, use_keys: bool) -> np.ndarray:
    w = step_width(use_keys)
    if not samples:
        return np.empty((0, (L - 1) * w))
    return np.stack([vectorize(fs, L, use_keys) for fs in samples])


def drop_key_codes(X: np.ndarray) -> np.ndarray:
    """Project K=1 vectors onto their K=0 coordinates."""
    n, d = X.shape
    w = N_TIME_FEATURES + 1
    if d % w:
        raise ShapeError(f"dimension {d} is not a multiple of {w}")
    return X.reshape(n, d // w, w)[:, :, :N_TIME_FEATURES].reshape(n, -1)


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(X.mean(axis=0), std)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def check_training_set(kind: str, X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError(f"X must be (n, d) with one label per row; got {X.shape} and {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("training vectors must be finite")
    if not np.all((y == HUMAN) | (y == BOT)):
        raise ValueError("labels must be 0 (human) or 1 (bot)")
    if kind == "ocsvm":
        if np.any(y == BOT):
            raise ProtocolViolation("the one-class detector is trained on human samples only")
        if not len(y):
            raise EmptyClass("no human training samples")
    else:
        for label, name in ((HUMAN, "human"), (BOT, "bot")):
            if not np.any(y == label):
                raise EmptyClass(f"no {name} training samples")


def accuracy_score(pred: np.ndarray, labels: np.ndarray) -> float:
    pred, labels = np.asarray(pred), np.asarray(labels)
    if labels.size == 0:
        raise EmptyEvalSet("cannot score an empty evaluation set")
    if pred.shape != labels.shape:
        raise ShapeError(f"{pred.shape} predictions vs {labels.shape} labels")
    return float(np.mean(pred == labels))
