"""Run-long meters for energy and traffic.

Every joule a method spends and every byte it moves goes through these
counters, so the reported metrics reconcile exactly with what the world
state lost and what the logs saw.
"""

from __future__ import annotations

from collections import defaultdict


class EnergyMeter:
    def __init__(self, n_uavs: int):
        self.n = n_uavs
        self.by_category: dict[str, float] = defaultdict(float)
        self.per_uav: list[float] = [0.0] * n_uavs

    def charge(self, uav: int, amount: float, category: str) -> None:
        if amount < 0:
            raise ValueError(f"amount={amount!r} negative")
        self.by_category[category] += amount
        self.per_uav[uav] += amount

    def total(self, *, exclude: tuple[str, ...] = ()) -> float:
        return sum(v for k, v in self.by_category.items() if k not in exclude)

    def method_total(self) -> float:
        """Everything except the method-independent idle load."""
        return self.total(exclude=("base",))


class MessageMeter:
    def __init__(self):
        self.by_category: dict[str, int] = defaultdict(int)

    def log(self, nbytes: int, category: str) -> None:
        if nbytes < 0:
            raise ValueError(f"nbytes={nbytes!r} negative")
        self.by_category[category] += int(nbytes)

    def total_bytes(self) -> int:
        return sum(self.by_category.values())
