"""Gaussian kernel density models of the four time features.

``UniversalModel`` pools every subject into one density per feature;
``UserDependentModel`` keeps one set of four densities per subject.
Sampling is exact mixture sampling: pick a training value uniformly, then
add Gaussian noise with the kernel bandwidth.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyTrainingSet, InvalidBandwidth, SamplingExhausted
from .features import N_TIME_FEATURES, FeatureSequence, KeystrokeSequence
from .synthesis import MAX_RETRIES, assemble_sample

DEFAULT_BANDWIDTH = 1.0
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CHUNK = 1 << 22


@dataclass(frozen=True, eq=False)
class KdeModel:
    points: np.ndarray
    bandwidth: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1)
        if pts.size == 0:
            raise EmptyTrainingSet("KDE needs at least one training value")
        if not np.all(np.isfinite(pts)):
            raise EmptyTrainingSet("KDE training values must be finite")
        bw = float(self.bandwidth)
        if not (bw > 0 and math.isfinite(bw)):
            raise InvalidBandwidth(f"bandwidth must be positive, got {self.bandwidth!r}")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bandwidth", bw)

    @property
    def n_points(self) -> int:
        return self.points.size

    def density(self, x):
        return kde_density(self, x)

    def cdf(self, x):
        """Exact mixture CDF; used by goodness-of-fit checks."""
        from scipy.special import ndtr

        x = np.asarray(x, dtype=np.float64)
        flat = x.reshape(-1)
        out = np.empty(flat.shape)
        step = max(1, _CHUNK // self.n_points)
        for i in range(0, flat.size, step):
            z = (flat[i : i + step, None] - self.points[None, :]) / self.bandwidth
            out[i : i + step] = ndtr(z).mean(axis=1)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def sample(self, rng: np.random.Generator, size=None, positive: bool = False):
        return kde_sample(self, rng, positive=positive, size=size)


def kde_fit(values: Iterable[float], bandwidth: float = DEFAULT_BANDWIDTH) -> KdeModel:
    return KdeModel(np.asarray(list(values) if not isinstance(values, np.ndarray) else values), bandwidth)


def kde_density(m: KdeModel, x):
    """Average of Gaussian kernels centred on the training values."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty(flat.shape)
    step = max(1, _CHUNK // m.n_points)
    norm = m.n_points * m.bandwidth * _SQRT_2PI
    for i in range(0, flat.size, step):
        z = (flat[i : i + step, None] - m.points[None, :]) / m.bandwidth
        out[i : i + step] = np.exp(-0.5 * z * z).sum(axis=1) / norm
    return out.reshape(x.shape) if x.ndim else float(out[0])


def kde_sample(
    m: KdeModel,
    rng: np.random.Generator,
    positive: bool = False,
    size=None,
    max_retries: int = MAX_RETRIES,
):
    """Draw from the KDE mixture; with ``positive`` redraw non-positive values."""
    n = 1 if size is None else int(np.prod(size))
    out = m.points[rng.integers(0, m.n_points, n)] + m.bandwidth * rng.standard_normal(n)
    if positive:
        bad = np.flatnonzero(out <= 0)
        tries = 0
        while bad.size:
            if tries == max_retries:
                raise SamplingExhausted(f"no positive draw after {max_retries} retries")
            out[bad] = m.points[rng.integers(0, m.n_points, bad.size)] + m.bandwidth * rng.standard_normal(
                bad.size
            )
            bad = bad[out[bad] <= 0]
            tries += 1
    if size is None:
        return float(out[0])
    return out.reshape(size)


@dataclass(frozen=True, eq=False)
class UniversalModel:
    f_models: tuple[KdeModel, ...]

    def __post_init__(self):
        fm = tuple(self.f_models)
        if len(fm) != N_TIME_FEATURES:
            raise EmptyTrainingSet(f"expected {N_TIME_FEATURES} feature models, got {len(fm)}")
        object.__setattr__(self, "f_models", fm)

    def draw(self, feature: int, codes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # key identity is ignored; the draw depends only on how many values are needed
        return kde_sample(self.f_models[feature - 1], rng, positive=feature == 1, size=len(codes))


@dataclass(frozen=True, eq=False)
class UserModel(UniversalModel):
    user_id: str = ""


@dataclass(frozen=True, eq=False)
class UserDependentModel:
    users: tuple[UserModel, ...]

    def __post_init__(self):
        users = tuple(self.users)
        if not users:
            raise EmptyTrainingSet("user-dependent model needs at least one user")
        ids = [u.user_id for u in users]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate user ids")
        object.__setattr__(self, "users", users)

    def __len__(self) -> int:
        return len(self.users)

    def __getitem__(self, i: int) -> UserModel:
        return self.users[i]

    def user(self, user_id: str) -> UserModel:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise KeyError(user_id)


def _pool(train: Sequence[FeatureSequence]) -> np.ndarray:
    blocks = [fs.values[:, :N_TIME_FEATURES] for fs in train if fs.n_steps]
    if not blocks:
        raise EmptyTrainingSet("no feature steps to fit")
    return np.concatenate(blocks, axis=0)


def fit_universal(train: Sequence[FeatureSequence], bandwidth: float = DEFAULT_BANDWIDTH) -> UniversalModel:
    pooled = _pool(train)
    return UniversalModel(tuple(KdeModel(pooled[:, i], bandwidth) for i in range(N_TIME_FEATURES)))


def fit_user_dependent(
    train: Sequence[FeatureSequence], bandwidth: float = DEFAULT_BANDWIDTH
) -> UserDependentModel:
    by_user: dict[str, list[FeatureSequence]] = {}
    for fs in train:
        by_user.setdefault(fs.subject_id, []).append(fs)
    users = []
    for uid, seqs in by_user.items():
        try:
            pooled = _pool(seqs)
        except EmptyTrainingSet:
            warnings.warn(f"subject {uid!r} has no feature steps; skipped", stacklevel=2)
            continue
        users.append(
            UserModel(tuple(KdeModel(pooled[:, i], bandwidth) for i in range(N_TIME_FEATURES)), uid)
        )
    if not users:
        raise EmptyTrainingSet("no subject had usable feature steps")
    return UserDependentModel(tuple(users))


def synthesize_kde(
    model: UniversalModel,
    key_codes: Sequence[int],
    rng: np.random.Generator,
    subject_id: str = "synthetic",
    sample_id: str = "0",
) -> KeystrokeSequence:
    """Synthesize one sample typing ``key_codes`` from a universal or per-user model."""
    if isinstance(model, UserDependentModel):
        raise TypeError("pick a single UserModel from the user-dependent model first")
    return assemble_sample(model.draw, key_codes, rng, subject_id, sample_id)
