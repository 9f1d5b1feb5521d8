"""Dynamic trust scoring for UAV nodes.

A node's trust evolves as a convex blend of its previous score, its freshly
observed behavior (packet delivery and response latency), and its remaining
battery fraction. All scores live in [0, 1]: 1 is fully trustworthy, 0 is
rogue. Everything here is a pure function of its inputs and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

WEIGHT_TOL = 1e-9

# Defaults used when a scenario does not override them.
DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 0.3
DEFAULT_GAMMA = 0.2
DEFAULT_W1 = 0.6
DEFAULT_W2 = 0.4
DEFAULT_RT_MAX_MS = 100.0
DEFAULT_ROGUE_THRESHOLD = 0.4
INITIAL_TRUST = 0.5
NEUTRAL_BEHAVIOR = 0.5


class DomainError(ValueError):
    """A score, weight, or threshold left its documented range."""


class NoObservations(Exception):
    """No interaction records were available for the requested subject."""


class InvalidCapacity(ValueError):
    """Energy capacity must be strictly positive."""


def _check_unit(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name}={value!r} outside [0, 1]")
    return float(value)


@dataclass(frozen=True)
class TrustWeights:
    """Blend weights for previous trust, behavior, and energy (sum to 1)."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            _check_unit(name, getattr(self, name))
        if abs(self.alpha + self.beta + self.gamma - 1.0) > WEIGHT_TOL:
            raise DomainError(
                f"alpha+beta+gamma={self.alpha + self.beta + self.gamma!r}, must be 1"
            )


@dataclass(frozen=True)
class BehaviorWeights:
    """Weights for the delivery-ratio and response-time behavior terms."""

    w1: float = DEFAULT_W1
    w2: float = DEFAULT_W2

    def __post_init__(self):
        _check_unit("w1", self.w1)
        _check_unit("w2", self.w2)
        if abs(self.w1 + self.w2 - 1.0) > WEIGHT_TOL:
            raise DomainError(f"w1+w2={self.w1 + self.w2!r}, must be 1")


@dataclass(frozen=True)
class InteractionRecord:
    """One observed exchange: `observer` measured `subject` during `round`."""

    observer: int
    subject: int
    pdr: float
    response_time: float  # milliseconds
    round: int

    def __post_init__(self):
        _check_unit("pdr", self.pdr)
        if self.response_time < 0:
            raise DomainError(f"response_time={self.response_time!r} negative")
        if self.round < 0:
            raise DomainError(f"round={self.round!r} negative")


@dataclass(frozen=True)
class EnergyState:
    """Battery snapshot in abstract energy units."""

    remaining: float
    capacity: float

    def __post_init__(self):
        if self.capacity <= 0:
            raise InvalidCapacity(f"capacity={self.capacity!r} must be > 0")
        if not 0.0 <= self.remaining <= self.capacity:
            raise DomainError(
                f"remaining={self.remaining!r} outside [0, {self.capacity!r}]"
            )

    @property
    def depleted(self) -> bool:
        return self.remaining <= 0.0


@dataclass
class TrustState:
    """Current trust score of one UAV plus its (round, score) history."""

    uav: int
    score: float = INITIAL_TRUST
    history: list[tuple[int, float]] = field(default_factory=list)

    def record(self, round: int, score: float) -> None:
        _check_unit("score", score)
        if self.history and round <= self.history[-1][0]:
            raise DomainError(
                f"round {round} not after last recorded round {self.history[-1][0]}"
            )
        self.score = score
        self.history.append((round, score))


class Classification(Enum):
    TRUSTWORTHY = "trustworthy"
    ROGUE = "rogue"


def behavior_score_from_means(
    pdr_mean: float,
    rt_clipped_mean: float,
    rt_max: float,
    weights: BehaviorWeights = BehaviorWeights(),
) -> float:
    """Behavior score from pre-aggregated observations.

    `rt_clipped_mean` must be the mean of response times already clipped to
    `rt_max`, which keeps the response term (and so the score) inside [0, 1].
    """
    if rt_max <= 0:
        raise DomainError(f"rt_max={rt_max!r} must be > 0")
    _check_unit("pdr_mean", pdr_mean)
    rt = min(rt_clipped_mean, rt_max)
    if rt < 0:
        raise DomainError(f"rt_clipped_mean={rt_clipped_mean!r} negative")
    return weights.w1 * pdr_mean + weights.w2 * (1.0 - rt / rt_max)


def behavior_score(
    records: Sequence[InteractionRecord],
    rt_max: float = DEFAULT_RT_MAX_MS,
    weights: BehaviorWeights = BehaviorWeights(),
) -> float:
    """Score one subject's behavior from its observation records in a round.

    Response times above `rt_max` are clipped to `rt_max` before averaging,
    so a node that never answers scores exactly `w1 * mean(pdr)`.

    Raises NoObservations when `records` is empty; callers that want the
    idle-node convention substitute NEUTRAL_BEHAVIOR instead.
    """
    if rt_max <= 0:
        raise DomainError(f"rt_max={rt_max!r} must be > 0")
    if not records:
        raise NoObservations("no interaction records for subject")
    pdr_mean = sum(r.pdr for r in records) / len(records)
    rt_mean = sum(min(r.response_time, rt_max) for r in records) / len(records)
    return behavior_score_from_means(pdr_mean, rt_mean, rt_max, weights)


def energy_score(state: EnergyState) -> float:
    """Remaining battery fraction, clamped to [0, 1]."""
    if state.capacity <= 0:
        raise InvalidCapacity(f"capacity={state.capacity!r} must be > 0")
    return min(max(state.remaining / state.capacity, 0.0), 1.0)


def update_trust(
    prev: float,
    behavior: float,
    energy: float,
    weights: TrustWeights = TrustWeights(),
) -> float:
    """Convex blend of previous trust, behavior score, and energy score."""
    _check_unit("prev", prev)
    _check_unit("behavior", behavior)
    _check_unit("energy", energy)
    return weights.alpha * prev + weights.beta * behavior + weights.gamma * energy


def classify(trust: float, threshold: float = DEFAULT_ROGUE_THRESHOLD) -> Classification:
    """Rogue iff trust is strictly below the threshold."""
    _check_unit("trust", trust)
    _check_unit("threshold", threshold)
    if trust < threshold:
        return Classification.ROGUE
    return Classification.TRUSTWORTHY
