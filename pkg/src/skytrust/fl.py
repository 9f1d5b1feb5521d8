"""Local logistic trust models and their federated aggregation.

Each UAV owns a growing dataset of labeled observation features and trains a
small logistic-regression model by full-batch gradient descent. Globals are
formed either by dataset-size weighting or by trust-times-size weighting.
Model parameters serialize as little-endian float64, coefficients first then
bias; the ledger stores the SHA-256 digest of exactly those bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .trust import DomainError, EnergyState, TrustState, _check_unit

N_FEATURES = 4
DEFAULT_LEARNING_RATE = 0.8
DEFAULT_EPOCHS = 30
DEFAULT_EPSILON = 0.01
MAX_FL_ROUNDS = 50
DEFAULT_ENVELOPE_BYTES = 256
FLOAT_BYTES = 8


class DegenerateWeights(Exception):
    """Aggregation weights summed to zero."""


class RoundSkipped(Exception):
    """No participant was eligible for this training round."""


@dataclass(frozen=True)
class FeatureVector:
    """Observation summary of one subject by one observer in one round."""

    pdr_mean: float
    rt_norm: float
    energy_score: float
    interaction_rate: float

    def __post_init__(self):
        for name in ("pdr_mean", "rt_norm", "energy_score", "interaction_rate"):
            _check_unit(name, getattr(self, name))

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.pdr_mean, self.rt_norm, self.energy_score, self.interaction_rate]
        )


class LocalDataset:
    """Labeled feature vectors owned by one UAV. Label 1 marks a rogue subject."""

    def __init__(self, owner: int):
        self.owner = owner
        self._rows: list[np.ndarray] = []
        self._labels: list[int] = []
        self._cache: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def size(self) -> int:
        return len(self._rows)

    def add(self, features: FeatureVector | np.ndarray, label: int) -> None:
        if label not in (0, 1):
            raise DomainError(f"label={label!r} must be 0 or 1")
        row = features.as_array() if isinstance(features, FeatureVector) else np.asarray(
            features, dtype=float
        )
        if row.shape != (N_FEATURES,):
            raise DomainError(f"feature row has shape {row.shape}, want ({N_FEATURES},)")
        self._rows.append(row)
        self._labels.append(label)
        self._cache = None

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._cache is None:
            if self._rows:
                x = np.vstack(self._rows)
                y = np.array(self._labels, dtype=float)
            else:
                x = np.empty((0, N_FEATURES))
                y = np.empty((0,))
            self._cache = (x, y)
        return self._cache


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Logistic model coefficients plus bias; treated as immutable."""

    coefficients: np.ndarray
    bias: float

    def __post_init__(self):
        coefs = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coefs)
        if not np.all(np.isfinite(coefs)) or not np.isfinite(self.bias):
            raise DomainError("model parameters must be finite")

    @classmethod
    def zeros(cls, n_features: int = N_FEATURES) -> "ModelParams":
        return cls(np.zeros(n_features), 0.0)

    @property
    def n_params(self) -> int:
        return self.coefficients.size + 1

    def to_bytes(self) -> bytes:
        return (
            self.coefficients.astype("<f8").tobytes()
            + np.float64(self.bias).astype("<f8").tobytes()
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ModelParams":
        values = np.frombuffer(raw, dtype="<f8")
        if values.size < 1:
            raise DomainError("parameter blob too short")
        return cls(values[:-1].copy(), float(values[-1]))

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()

    def negated(self) -> "ModelParams":
        return ModelParams(-self.coefficients, -self.bias)

    def allclose(self, other: "ModelParams", tol: float = 0.0) -> bool:
        return bool(
            np.allclose(self.coefficients, other.coefficients, rtol=0, atol=tol)
            and abs(self.bias - other.bias) <= tol
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form is numerically stable for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def predict_proba(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Rogue probability for each row of `x`."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return _sigmoid(x @ params.coefficients + params.bias)


def predict(params: ModelParams, features: FeatureVector) -> float:
    """Rogue probability for a single observation summary."""
    return float(predict_proba(params, features.as_array())[0])


def logistic_loss(params: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy, computed in the log domain for stability."""
    z = np.asarray(x, dtype=float) @ params.coefficients + params.bias
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logistic_gradient(
    params: ModelParams, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, float]:
    """Analytic gradient of `logistic_loss` in (coefficients, bias) order."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    residual = _sigmoid(x @ params.coefficients + params.bias) - y
    grad_w = x.T @ residual / len(y)
    grad_b = float(np.mean(residual))
    return grad_w, grad_b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    epochs: int = DEFAULT_EPOCHS
    class_balance: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DomainError(f"learning_rate={self.learning_rate!r} must be > 0")
        if self.epochs < 0:
            raise DomainError(f"epochs={self.epochs!r} negative")


class TrainResult(NamedTuple):
    params: ModelParams
    skipped: bool


def _sample_weights(y: np.ndarray, balance: bool) -> np.ndarray:
    if not balance:
        return np.ones_like(y)
    positives = float(y.sum())
    if positives == 0.0 or positives == len(y):
        return np.ones_like(y)
    # both classes contribute half the effective batch
    w_pos = len(y) / (2.0 * positives)
    w_neg = len(y) / (2.0 * (len(y) - positives))
    return np.where(y == 1.0, w_pos, w_neg)


def train_local(
    data: LocalDataset,
    init: ModelParams,
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Full-batch gradient descent on the logistic cross-entropy.

    With `class_balance` the per-sample losses are prevalence-weighted so a
    rare rogue class still moves the boundary; the weights average to one,
    and the plain loss is the default. An empty dataset returns `init`
    untouched with the skipped flag set.
    """
    x, y = data.as_arrays()
    if len(y) == 0:
        return TrainResult(init, True)
    weights = _sample_weights(y, config.class_balance)
    w = init.coefficients.copy()
    b = init.bias
    for _ in range(config.epochs):
        residual = (_sigmoid(x @ w + b) - y) * weights
        w = w - config.learning_rate * (x.T @ residual / len(y))
        b = b - config.learning_rate * float(np.mean(residual))
    return TrainResult(ModelParams(w, b), False)


def _weighted_mean(models: Sequence[ModelParams], weights: Sequence[float]) -> ModelParams:
    total = float(sum(weights))
    if total <= 0.0:
        raise DegenerateWeights("aggregation weights sum to zero")
    coefs = np.zeros_like(models[0].coefficients)
    bias = 0.0
    for model, weight in zip(models, weights):
        if model.coefficients.shape != coefs.shape:
            raise DomainError("client models disagree on coefficient count")
        share = weight / total
        coefs = coefs + share * model.coefficients
        bias += share * model.bias
    return ModelParams(coefs, bias)


def fedavg_aggregate(
    models: Sequence[ModelParams], sizes: Sequence[int]
) -> ModelParams:
    """Dataset-size weighted mean of client parameters."""
    if len(models) == 0 or len(models) != len(sizes):
        raise DomainError("models and sizes must be equal-length and non-empty")
    if any(s < 0 for s in sizes):
        raise DomainError("dataset sizes must be non-negative")
    return _weighted_mean(models, [float(s) for s in sizes])


def trust_weighted_aggregate(
    models: Sequence[ModelParams],
    sizes: Sequence[int],
    trusts: Sequence[float],
) -> ModelParams:
    """Mean of client parameters weighted by trust * dataset size."""
    if len(models) == 0 or not len(models) == len(sizes) == len(trusts):
        raise DomainError("models, sizes, and trusts must be equal-length, non-empty")
    if any(s < 0 for s in sizes):
        raise DomainError("dataset sizes must be non-negative")
    for t in trusts:
        _check_unit("trust", t)
    return _weighted_mean(models, [t * float(s) for t, s in zip(trusts, sizes)])


@dataclass
class FLRoundState:
    """Round counter and validation-accuracy history for convergence checks."""

    round: int = 0
    accuracy_history: list[float] = field(default_factory=list)
    epsilon: float = DEFAULT_EPSILON


def has_converged(state: FLRoundState) -> bool:
    """True once consecutive accuracies differ by strictly less than epsilon."""
    if len(state.accuracy_history) < 2:
        return False
    return abs(state.accuracy_history[-1] - state.accuracy_history[-2]) < state.epsilon


class AggregationMode(Enum):
    FEDAVG = "fedavg"
    TRUST_WEIGHTED = "trust_weighted"


class FLRoundResult(NamedTuple):
    params: ModelParams
    bytes_per_uav: dict[int, int]
    trained: int


def message_bytes(params: ModelParams, envelope: int = DEFAULT_ENVELOPE_BYTES) -> int:
    """Wire size of one parameter share: 8 bytes per value plus the envelope."""
    return params.n_params * FLOAT_BYTES + envelope


def run_fl_round(
    participants: Sequence[tuple[LocalDataset, TrustState, EnergyState]],
    global_params: ModelParams,
    mode: AggregationMode,
    config: TrainConfig = TrainConfig(),
    envelope_bytes: int = DEFAULT_ENVELOPE_BYTES,
    poisoned: Sequence[bool] | None = None,
) -> FLRoundResult:
    """One synchronous training round.

    Depleted UAVs sit the round out; UAVs with data train from the current
    global, share their parameters (billed per message), and the shares are
    folded together according to `mode`. Entries in `poisoned` mark clients
    that submit the negation of what they trained.
    """
    if poisoned is None:
        poisoned = [False] * len(participants)
    if len(poisoned) != len(participants):
        raise DomainError("poisoned flags must align with participants")

    eligible = [
        (data, trust, energy, bad)
        for (data, trust, energy), bad in zip(participants, poisoned)
        if not energy.depleted
    ]
    if not eligible:
        raise RoundSkipped("no participant has energy left")

    models: list[ModelParams] = []
    sizes: list[int] = []
    trusts: list[float] = []
    bytes_per_uav: dict[int, int] = {}
    trained = 0
    for data, trust, _, bad in eligible:
        result = train_local(data, global_params, config)
        if result.skipped:
            continue  # nothing to share
        trained += 1
        submitted = result.params.negated() if bad else result.params
        models.append(submitted)
        sizes.append(data.size)
        trusts.append(trust.score)
        bytes_per_uav[data.owner] = message_bytes(submitted, envelope_bytes)

    if not models:
        return FLRoundResult(global_params, {}, 0)

    if mode is AggregationMode.FEDAVG:
        new_global = fedavg_aggregate(models, sizes)
    else:
        new_global = trust_weighted_aggregate(models, sizes, trusts)
    return FLRoundResult(new_global, bytes_per_uav, trained)
