"""The five comparison metrics and the per-run report that carries them.

Reports store fractions; percent rendering happens only where tables or
figures are emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

MB = 1_000_000  # decimal megabytes throughout


class UndefinedMetric(Exception):
    """The metric's denominator is empty for this run."""


def accuracy(predictions: Sequence[int], truth: Sequence[int]) -> float:
    """Fraction of predictions that match the truth labels."""
    if len(predictions) != len(truth):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions, {len(truth)} truths"
        )
    if len(truth) == 0:
        raise UndefinedMetric("accuracy over zero predictions")
    correct = sum(1 for p, t in zip(predictions, truth) if p == t)
    return correct / len(truth)


def detection_rate(flagged: set[int], actual_rogues: set[int]) -> float:
    """Share of true rogues present in the flagged set."""
    if not actual_rogues:
        raise UndefinedMetric("no rogues in scenario")
    return len(flagged & actual_rogues) / len(actual_rogues)


def comm_overhead_mb_per_uav(total_bytes: int, uav_count: int) -> float:
    """Total trust-related traffic averaged over the fleet, in MB."""
    if uav_count < 1:
        raise UndefinedMetric("no UAVs")
    if total_bytes < 0:
        raise ValueError(f"total_bytes={total_bytes!r} negative")
    return total_bytes / uav_count / MB


def energy_per_transaction(total_joules: float, transaction_count: int) -> float:
    """Average energy billed per committed transaction."""
    if transaction_count < 1:
        raise UndefinedMetric("no transactions")
    if total_joules < 0:
        raise ValueError(f"total_joules={total_joules!r} negative")
    return total_joules / transaction_count


@dataclass
class MetricsReport:
    """Scalar results of one run plus the per-round series behind them.

    `convergence_rounds` is None exactly for the methods that have no
    federated training loop.
    """

    method: str
    seed: int
    accuracy: float
    detection_rate: float
    comm_overhead_mb_per_uav: float
    energy_per_transaction: float
    convergence_rounds: int | None
    accuracy_series: list[float] = field(default_factory=list)
    detection_series: list[float] = field(default_factory=list)
    cumulative_energy_series: list[float] = field(default_factory=list)
    cumulative_comm_mb_series: list[float] = field(default_factory=list)
    fl_accuracy_series: list[float | None] = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("accuracy", "detection_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value!r} outside [0, 1]")
        if self.comm_overhead_mb_per_uav < 0 or self.energy_per_transaction < 0:
            raise ValueError("overhead and energy metrics must be non-negative")

    def scalars(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "detection_rate": self.detection_rate,
            "comm_overhead_mb_per_uav": self.comm_overhead_mb_per_uav,
            "energy_per_transaction_joules": self.energy_per_transaction,
            "convergence_rounds": self.convergence_rounds,
        }


# Row labels for emitted comparison tables, in display order.
TABLE_ROWS = (
    "Accuracy in Trust Score Prediction (%)",
    "Communication Overhead (MB per UAV)",
    "Energy Consumption (Joules per Transaction)",
    "Convergence Time (Iterations)",
    "Rogue UAV Detection Rate (%)",
)

METHOD_LABELS = {"dtsam": "DTSAM-EAC", "cte": "CTE", "sbst": "SBST"}
