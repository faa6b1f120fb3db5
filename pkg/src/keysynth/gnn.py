"""Key-conditional generative network for keystroke timing.

One network per time feature maps a normalized key code to the parameters
of a timing distribution (Gaussian by default): two tanh layers of 100
units feed a linear location head and a softplus scale head. Networks are
trained by minimising the negative log-likelihood of observed latencies
and synthesize by sampling the predicted distribution per key.

Internally each network works on standardized targets; ``loc``/``scale``
map its outputs back to milliseconds. A freshly built network has
``loc=0, scale=1`` so its raw heads are visible unchanged.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    EmptyTrainingSet,
    InvalidParameters,
    NumericalError,
    SamplingExhausted,
    TrainingDiverged,
)
from .features import KEY_CODE_MAX, N_TIME_FEATURES, FeatureSequence, KeystrokeSequence
from .neural import Adam, Dense, Sequential
from .synthesis import MAX_RETRIES, assemble_sample

log = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
SIGMA_BIAS0 = math.log(math.e - 1.0)  # softplus(b0) == 1


# -- distribution families --------------------------------------------------


class GaussianFamily:
    name = "gaussian"
    n_params = 2

    @staticmethod
    def nll(mu, sigma, x, floor=1e-3):
        sigma = np.asarray(sigma, dtype=np.float64)
        if np.any(~(sigma > 0)):
            raise InvalidParameters("Gaussian scale must be positive")
        s = np.maximum(sigma, floor)
        z = (np.asarray(x, dtype=np.float64) - mu) / s
        return 0.5 * z * z + np.log(s) + _HALF_LOG_2PI

    @staticmethod
    def nll_grad(mu, sigma, x, floor=1e-3):
        """Per-sample derivatives of ``nll`` with respect to (mu, sigma)."""
        s = np.maximum(sigma, floor)
        z = (x - mu) / s
        dmu = -z / s
        dsigma = np.where(sigma > floor, (1.0 - z * z) / s, 0.0)
        return dmu, dsigma

    @staticmethod
    def sample(mu, sigma, rng, size=None):
        return mu + sigma * rng.standard_normal(size)


FAMILIES = {"gaussian": GaussianFamily}


def nll_loss(params, x, floor: float = 1e-3, family: str = "gaussian"):
    """Negative log-likelihood of ``x`` under ``params`` = (mu, sigma)."""
    mu, sigma = params
    out = FAMILIES[family].nll(mu, sigma, x, floor)
    return float(out) if np.ndim(out) == 0 else out


def nll_grad(params, x, floor: float = 1e-3, family: str = "gaussian"):
    mu, sigma = params
    return FAMILIES[family].nll_grad(np.asarray(mu, float), np.asarray(sigma, float), np.asarray(x, float), floor)


# -- networks ----------------------------------------------------------------


class FeatureNet:
    """Trunk + location/scale heads for one time feature."""

    def __init__(
        self, trunk: Sequential, mu_head: Dense, sigma_head: Dense, loc=0.0, scale=1.0, in_loc=0.0, in_scale=1.0
    ):
        self.trunk = trunk
        self.mu_head = mu_head
        self.sigma_head = sigma_head
        self.loc = float(loc)
        self.scale = float(scale)
        self.in_loc = float(in_loc)
        self.in_scale = float(in_scale)

    @classmethod
    def init(cls, rng: np.random.Generator, hidden: int = 100) -> "FeatureNet":
        trunk = Sequential(
            [Dense.init(1, hidden, "tanh", rng), Dense.init(hidden, hidden, "tanh", rng)]
        )
        mu_head = Dense(np.zeros((1, hidden)), np.zeros(1), "linear")
        sigma_head = Dense(np.zeros((1, hidden)), np.full(1, SIGMA_BIAS0), "softplus")
        return cls(trunk, mu_head, sigma_head)

    def place_transitions(self, key_norm: np.ndarray, rng: np.random.Generator) -> None:
        """Re-initialize the first layer so each tanh unit switches half a key code
        away from an observed code, with a slope of one to three per code step.

        A scalar key input puts neighbouring codes very close together; with a
        generic init the trunk needs many epochs to grow weights steep enough to
        tell them apart.
        """
        first = self.trunk.layers[0]
        n = first.weights.shape[0]
        step = 1.0 / (255.0 * self.in_scale)
        codes = np.unique((np.asarray(key_norm, dtype=np.float64) - self.in_loc) / self.in_scale)
        centres = rng.choice(codes, n) + rng.choice([-0.5, 0.5], n) * step
        slopes = rng.choice([-1.0, 1.0], n) * rng.uniform(1.0, 3.0, n) / step
        first.weights[:, 0] = slopes
        first.biases[:] = -slopes * centres

    @property
    def layers(self):
        return [*self.trunk.layers, self.mu_head, self.sigma_head]

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self):
        return [g for layer in self.layers for g in layer.grads]

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def forward_raw(self, key_norm):
        """Standardized-scale (mu, sigma) for a batch of key_norm values."""
        x = (np.asarray(key_norm, dtype=np.float64).reshape(-1, 1) - self.in_loc) / self.in_scale
        h = self.trunk.forward(x)
        mu = self.mu_head.forward(h)[:, 0]
        sigma = self.sigma_head.forward(h)[:, 0]
        return mu, sigma

    def backward_raw(self, dmu, dsigma):
        dh = self.mu_head.backward(dmu[:, None]) + self.sigma_head.backward(dsigma[:, None])
        self.trunk.backward(dh)

    def forward(self, key_norm):
        mu, sigma = self.forward_raw(key_norm)
        return self.loc + self.scale * mu, self.scale * sigma

    def to_dict(self) -> dict:
        return {
            "loc": self.loc,
            "scale": self.scale,
            "in_loc": self.in_loc,
            "in_scale": self.in_scale,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureNet":
        layers = [Dense.from_dict(x) for x in d["layers"]]
        return cls(Sequential(layers[:-2]), layers[-2], layers[-1], d["loc"], d["scale"], d["in_loc"], d["in_scale"])


@dataclass(frozen=True)
class GnnConfig:
    hidden: int = 100
    batch_size: int = 256
    max_epochs: int = 200
    lr: float = 1e-3
    lr_final: float = 1e-5
    decay_epochs: int | None = 15
    patience: int = 10
    min_delta: float = 1e-4
    sigma_floor: float = 1e-3
    family: str = "gaussian"
    condition_on: str = "first"
    max_pairs: int | None = None


@dataclass(eq=False)
class GnnModel:
    nets: list[FeatureNet]
    config: GnnConfig = field(default_factory=GnnConfig)
    history: list[list[float]] = field(default_factory=lambda: [[] for _ in range(N_TIME_FEATURES)])

    def __post_init__(self):
        if len(self.nets) != N_TIME_FEATURES:
            raise ValueError(f"expected {N_TIME_FEATURES} feature networks, got {len(self.nets)}")
        if self.config.family not in FAMILIES:
            raise ValueError(f"unknown distribution family {self.config.family!r}")

    @classmethod
    def init(cls, seed: int = 0, config: GnnConfig | None = None) -> "GnnModel":
        config = config or GnnConfig()
        nets = [FeatureNet.init(_feature_rng(seed, i), config.hidden) for i in range(1, 5)]
        return cls(nets, config)

    @property
    def family(self):
        return FAMILIES[self.config.family]

    def draw(self, feature: int, codes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return gnn_sample(self, feature, np.asarray(codes) / KEY_CODE_MAX, rng)


def _feature_rng(seed: int, feature: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x6E6E, feature]))


def gnn_forward(model: GnnModel, feature_index: int, key_norm):
    if not 1 <= feature_index <= N_TIME_FEATURES:
        raise ValueError(f"feature_index must be in 1..4, got {feature_index}")
    kn = np.asarray(key_norm, dtype=np.float64)
    mu, sigma = model.nets[feature_index - 1].forward(kn.reshape(-1))
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise NumericalError("non-finite distribution parameters")
    if kn.ndim == 0:
        return float(mu[0]), float(sigma[0])
    return mu.reshape(kn.shape), sigma.reshape(kn.shape)


def gnn_sample(model: GnnModel, feature_index: int, key_norm, rng: np.random.Generator, max_retries=MAX_RETRIES):
    """One draw per key_norm entry; hold latencies are redrawn until positive."""
    kn = np.atleast_1d(np.asarray(key_norm, dtype=np.float64))
    mu, sigma = gnn_forward(model, feature_index, kn)
    sigma = np.maximum(sigma, model.config.sigma_floor)
    fam = model.family
    out = fam.sample(mu, sigma, rng, kn.shape)
    if feature_index == 1:
        bad = np.flatnonzero(out <= 0)
        tries = 0
        while bad.size:
            if tries == max_retries:
                raise SamplingExhausted(f"no positive hold after {max_retries} retries")
            out[bad] = fam.sample(mu[bad], sigma[bad], rng, bad.shape)
            bad = bad[out[bad] <= 0]
            tries += 1
    return float(out[0]) if np.ndim(key_norm) == 0 else out


def training_pairs(corpus: Sequence[FeatureSequence], feature_index: int, condition_on: str = "first"):
    """(key_norm, value) arrays for one feature across a corpus."""
    keys, vals = [], []
    col = feature_index - 1
    for fs in corpus:
        v = fs.values
        if not len(v):
            continue
        if feature_index == 1 or condition_on == "first":
            keys.append(v[:, 4])
            vals.append(v[:, col])
        else:
            keys.append(v[1:, 4])
            vals.append(v[:-1, col])
    if not keys:
        raise EmptyTrainingSet("corpus has no feature steps")
    k, x = np.concatenate(keys), np.concatenate(vals)
    if not k.size:
        raise EmptyTrainingSet("corpus has no usable pairs")
    if not np.all(np.isfinite(x)):
        raise ValueError("training values must be finite")
    return k, x


def train_feature_net(
    net: FeatureNet,
    key_norm: np.ndarray,
    values: np.ndarray,
    config: GnnConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Fit one network in place by minibatch Adam on mean NLL; returns epoch-mean losses (ms scale)."""
    fam = FAMILIES[config.family]
    if config.max_pairs is not None and len(values) > config.max_pairs:
        keep = np.sort(rng.choice(len(values), config.max_pairs, replace=False))
        key_norm, values = key_norm[keep], values[keep]
    loc = float(values.mean())
    scale = float(values.std())
    if not scale > 0:
        scale = max(abs(loc) * 0.1, 1.0)
    net.loc, net.scale = loc, scale
    in_scale = float(key_norm.std())
    net.in_loc = float(key_norm.mean())
    net.in_scale = in_scale if in_scale > 0 else 1.0
    net.place_transitions(key_norm, rng)
    target = (values - loc) / scale
    floor = config.sigma_floor / scale
    log_scale = math.log(scale)

    n = len(target)
    opt = Adam(net.params, lr=config.lr)
    history: list[float] = []
    best, stale = math.inf, 0
    # exponential decay from lr to lr_final over decay_epochs, then held
    span = max((config.decay_epochs or config.max_epochs) - 1, 1)
    decay = (config.lr_final / config.lr) ** (1.0 / span)
    for epoch in range(config.max_epochs):
        lr = config.lr * decay ** min(epoch, span)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            net.zero_grad()
            mu, sigma = net.forward_raw(key_norm[idx])
            x = target[idx]
            dmu, dsigma = fam.nll_grad(mu, sigma, x, floor)
            m = len(idx)
            net.backward_raw(dmu / m, dsigma / m)
            opt.step(net.params, net.grads, lr)
        # a full pass at the epoch's end gives a far less noisy stopping signal
        # than the running minibatch average
        mu, sigma = net.forward_raw(key_norm)
        epoch_loss = float(fam.nll(mu, sigma, target, floor).mean()) + log_scale
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(f"NLL became non-finite at epoch {epoch}")
        history.append(epoch_loss)
        if epoch_loss < best - config.min_delta:
            best, stale = epoch_loss, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return history


def train_gnn(
    corpus: Sequence[FeatureSequence],
    config: GnnConfig | None = None,
    seed: int = 0,
    features: Sequence[int] = (1, 2, 3, 4),
    model: GnnModel | None = None,
) -> GnnModel:
    """Train the per-feature networks.

    Each feature gets its own rng stream derived from ``seed``, so training
    (or retraining) one feature never touches the others. Pass ``model`` to
    retrain a subset of features of an existing model in place.
    """
    if not corpus:
        raise EmptyTrainingSet("empty training corpus")
    config = config or (model.config if model else GnnConfig())
    if model is None:
        model = GnnModel.init(seed, config)
    elif model.config != config:
        model.config = replace(config)
    for i in features:
        k, x = training_pairs(corpus, i, config.condition_on)
        net = FeatureNet.init(_feature_rng(seed, i), config.hidden)
        hist = train_feature_net(net, k, x, config, _feature_rng(seed, 100 + i))
        model.nets[i - 1] = net
        model.history[i - 1] = hist
        log.info("feature %d: %d epochs, final NLL %.4f", i, len(hist), hist[-1])
    return model


def synthesize_gnn(
    model: GnnModel,
    key_codes: Sequence[int],
    rng: np.random.Generator,
    subject_id: str = "synthetic",
    sample_id: str = "0",
) -> KeystrokeSequence:
    return assemble_sample(
        model.draw, key_codes, rng, subject_id, sample_id, condition_on=model.config.condition_on
    )
