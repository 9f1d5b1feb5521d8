"""Discrete-time world model: UAV motion, link topology, observation traffic.

Each simulation round every connected pair of UAVs exchanges a batch of
probe packets in both directions. The observed delivery ratio, response
time, and probe count are drawn from the *subject's* profile, so what a
node shows the network is entirely its own doing. Rogue profiles carry an
activation round: before it they answer like honest nodes (a sleeper that
has entered the network but not yet turned), from it onward they draw from
their rogue ranges and, if configured, sabotage model training.

World stepping is single-threaded per run; separate runs never share state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .fl import FeatureVector
from .trust import DomainError, EnergyState, InteractionRecord, TrustState

DEFAULT_MAX_SPEED_KM = 0.15
DEFAULT_AUDIT_DELAY = 2

HONEST_PDR_RANGE = (0.85, 1.0)
HONEST_RT_RANGE = (5.0, 60.0)
HONEST_COUNT_RANGE = (40, 60)
ROGUE_PDR_RANGE = (0.2, 0.6)
ROGUE_RT_RANGE = (60.0, 200.0)
ROGUE_COUNT_RANGE = (15, 45)


class InvalidHub(ValueError):
    """Star topology named a hub id that is not in the world."""


class UavKind(Enum):
    HONEST = "honest"
    ROGUE = "rogue"


@dataclass(frozen=True)
class Mesh:
    radius_km: float


@dataclass(frozen=True)
class Star:
    hub: int


Topology = Mesh | Star


def _check_range(name: str, lo: float, hi: float, upper: float | None = None) -> None:
    if lo < 0 or lo > hi:
        raise DomainError(f"{name}=({lo!r}, {hi!r}) must satisfy 0 <= lo <= hi")
    if upper is not None and hi > upper:
        raise DomainError(f"{name}=({lo!r}, {hi!r}) exceeds {upper!r}")


@dataclass(frozen=True)
class UavProfile:
    """Behavioral envelope of one UAV.

    Rogue profiles turn at `onset_round`; the dormant ranges describe how
    they present themselves before turning (honest defaults, normally).
    """

    id: int
    kind: UavKind
    pdr_range: tuple[float, float] = HONEST_PDR_RANGE
    rt_range: tuple[float, float] = HONEST_RT_RANGE
    count_range: tuple[int, int] = HONEST_COUNT_RANGE
    poison_updates: bool = False
    onset_round: int = 0
    dormant_pdr_range: tuple[float, float] = HONEST_PDR_RANGE
    dormant_rt_range: tuple[float, float] = HONEST_RT_RANGE
    dormant_count_range: tuple[int, int] = HONEST_COUNT_RANGE

    def __post_init__(self):
        _check_range("pdr_range", *self.pdr_range, upper=1.0)
        _check_range("rt_range", *self.rt_range)
        _check_range("count_range", *self.count_range)
        if self.onset_round < 0:
            raise DomainError(f"onset_round={self.onset_round!r} negative")

    def active(self, round: int) -> bool:
        """Rogue behavior switched on (always True for honest profiles)."""
        return self.kind is UavKind.HONEST or round >= self.onset_round

    def pdr_range_at(self, round: int) -> tuple[float, float]:
        return self.pdr_range if self.active(round) else self.dormant_pdr_range

    def rt_range_at(self, round: int) -> tuple[float, float]:
        return self.rt_range if self.active(round) else self.dormant_rt_range

    def count_range_at(self, round: int) -> tuple[int, int]:
        return self.count_range if self.active(round) else self.dormant_count_range

    def poisoning_at(self, round: int) -> bool:
        return (
            self.kind is UavKind.ROGUE and self.poison_updates and self.active(round)
        )


def honest_profile(uav_id: int) -> UavProfile:
    return UavProfile(id=uav_id, kind=UavKind.HONEST)


def rogue_profile(uav_id: int, onset_round: int = 0, poison_updates: bool = True) -> UavProfile:
    return UavProfile(
        id=uav_id,
        kind=UavKind.ROGUE,
        pdr_range=ROGUE_PDR_RANGE,
        rt_range=ROGUE_RT_RANGE,
        count_range=ROGUE_COUNT_RANGE,
        poison_updates=poison_updates,
        onset_round=onset_round,
    )


@dataclass
class UavNode:
    profile: UavProfile
    position: np.ndarray
    energy: EnergyState
    trust: TrustState


@dataclass
class WorldState:
    round: int
    uavs: list[UavNode]
    users: int
    topology: Topology
    area_side_km: float

    def __post_init__(self):
        for node in self.uavs:
            x, y = node.position
            if not (0 <= x <= self.area_side_km and 0 <= y <= self.area_side_km):
                raise DomainError(
                    f"uav {node.profile.id} at {node.position} outside area"
                )

    @property
    def n(self) -> int:
        return len(self.uavs)

    def rogue_ids(self) -> set[int]:
        return {u.profile.id for u in self.uavs if u.profile.kind is UavKind.ROGUE}


def build_world(
    n_uavs: int,
    rogue_ids: Sequence[int],
    onsets: dict[int, int],
    users: int,
    topology: Topology,
    area_side_km: float,
    capacity: float,
    initial_trust: float,
    rng: np.random.Generator,
    poison_updates: bool = True,
) -> WorldState:
    """Place UAVs uniformly at random and wire up their profiles."""
    positions = rng.uniform(0.0, area_side_km, size=(n_uavs, 2))
    rogues = set(rogue_ids)
    uavs = []
    for i in range(n_uavs):
        if i in rogues:
            profile = rogue_profile(i, onsets.get(i, 0), poison_updates)
        else:
            profile = honest_profile(i)
        uavs.append(
            UavNode(
                profile=profile,
                position=positions[i],
                energy=EnergyState(capacity, capacity),
                trust=TrustState(uav=i, score=initial_trust),
            )
        )
    return WorldState(
        round=0, uavs=uavs, users=users, topology=topology, area_side_km=area_side_km
    )


def build_topology(world: WorldState) -> set[tuple[int, int]]:
    """Adjacency as (low id, high id) pairs."""
    if world.n < 1:
        raise DomainError("world has no UAVs")
    if isinstance(world.topology, Star):
        hub = world.topology.hub
        if not 0 <= hub < world.n:
            raise InvalidHub(f"hub id {hub} not among {world.n} UAVs")
        return {(min(hub, i), max(hub, i)) for i in range(world.n) if i != hub}
    radius = world.topology.radius_km
    positions = np.vstack([u.position for u in world.uavs])
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    edges = set()
    for i in range(world.n):
        for j in range(i + 1, world.n):
            if dist[i, j] <= radius:
                edges.add((i, j))
    return edges


def step_mobility(
    world: WorldState,
    rng: np.random.Generator,
    max_speed_km: float = DEFAULT_MAX_SPEED_KM,
) -> WorldState:
    """Move every UAV by a bounded random displacement, reflecting at walls."""
    if max_speed_km < 0:
        raise DomainError(f"max_speed_km={max_speed_km!r} negative")
    n = world.n
    headings = rng.uniform(0.0, 2.0 * np.pi, size=n)
    speeds = rng.uniform(0.0, max_speed_km, size=n)
    dx = speeds * np.cos(headings)
    dy = speeds * np.sin(headings)
    side = world.area_side_km
    for idx, node in enumerate(world.uavs):
        moved = node.position + np.array([dx[idx], dy[idx]])
        # fold into [0, 2*side) then mirror the upper half back inside
        folded = np.mod(moved, 2.0 * side)
        node.position = np.where(folded > side, 2.0 * side - folded, folded)
    return world


@dataclass
class RoundBatch:
    """Aggregated observations for one round, one row per directed link."""

    round: int
    observers: np.ndarray  # int ids
    subjects: np.ndarray  # int ids
    counts: np.ndarray  # probes exchanged on the link
    pdr_means: np.ndarray  # mean delivery ratio over the probes
    rt_means: np.ndarray  # mean response time, each probe clipped to rt_max
    record_count: int = 0

    def __post_init__(self):
        self.record_count = int(self.counts.sum())


def _directed_links(adjacency: set[tuple[int, int]]) -> list[tuple[int, int]]:
    links = []
    for i, j in sorted(adjacency):
        links.append((i, j))  # i observes j
        links.append((j, i))  # j observes i
    return links


def generate_round_batch(
    world: WorldState,
    adjacency: set[tuple[int, int]],
    rng: np.random.Generator,
    rt_max: float,
) -> RoundBatch:
    """Draw every probe for the round and aggregate per directed link.

    Per-probe delivery ratio, response time, and the probe count itself are
    uniform draws from the subject's currently active ranges. The draw order
    is fixed (sorted links), so identical seeds give identical traffic.
    """
    links = _directed_links(adjacency)
    m = len(links)
    if m == 0:
        return RoundBatch(
            round=world.round,
            observers=np.empty(0, dtype=int),
            subjects=np.empty(0, dtype=int),
            counts=np.empty(0, dtype=int),
            pdr_means=np.empty(0),
            rt_means=np.empty(0),
        )
    observers = np.array([o for o, _ in links], dtype=int)
    subjects = np.array([s for _, s in links], dtype=int)

    t = world.round
    profiles = [world.uavs[s].profile for s in subjects]
    cnt_lo = np.array([p.count_range_at(t)[0] for p in profiles], dtype=float)
    cnt_hi = np.array([p.count_range_at(t)[1] for p in profiles], dtype=float)
    pdr_lo = np.array([p.pdr_range_at(t)[0] for p in profiles])
    pdr_hi = np.array([p.pdr_range_at(t)[1] for p in profiles])
    rt_lo = np.array([p.rt_range_at(t)[0] for p in profiles])
    rt_hi = np.array([p.rt_range_at(t)[1] for p in profiles])

    counts = (cnt_lo + np.floor(rng.random(m) * (cnt_hi - cnt_lo + 1.0))).astype(int)
    counts = np.maximum(counts, 1)
    total = int(counts.sum())
    seg = np.repeat(np.arange(m), counts)
    pdr_draws = pdr_lo[seg] + rng.random(total) * (pdr_hi - pdr_lo)[seg]
    rt_draws = rt_lo[seg] + rng.random(total) * (rt_hi - rt_lo)[seg]
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    pdr_means = np.add.reduceat(pdr_draws, starts) / counts
    rt_means = np.add.reduceat(np.minimum(rt_draws, rt_max), starts) / counts
    return RoundBatch(
        round=t,
        observers=observers,
        subjects=subjects,
        counts=counts,
        pdr_means=pdr_means,
        rt_means=rt_means,
    )


def generate_interactions(
    world: WorldState,
    adjacency: set[tuple[int, int]],
    rng: np.random.Generator,
) -> list[InteractionRecord]:
    """Materialize each probe of the round as an individual record."""
    records = []
    t = world.round
    for observer, subject in _directed_links(adjacency):
        profile = world.uavs[subject].profile
        lo_c, hi_c = profile.count_range_at(t)
        count = int(rng.integers(lo_c, hi_c + 1))
        pdr_lo, pdr_hi = profile.pdr_range_at(t)
        rt_lo, rt_hi = profile.rt_range_at(t)
        for _ in range(max(count, 1)):
            records.append(
                InteractionRecord(
                    observer=observer,
                    subject=subject,
                    pdr=float(rng.uniform(pdr_lo, pdr_hi)),
                    response_time=float(rng.uniform(rt_lo, rt_hi)),
                    round=t,
                )
            )
    return records


def deplete_energy(
    world: WorldState,
    activity: Sequence[float] | None = None,
    base_drain: float = 0.0,
) -> np.ndarray:
    """Drain base load plus per-UAV activity, flooring at zero.

    Returns the energy actually drawn per UAV so accounting can bill it.
    """
    if base_drain < 0:
        raise DomainError(f"base_drain={base_drain!r} negative")
    costs = np.zeros(world.n) if activity is None else np.asarray(activity, dtype=float)
    if costs.shape != (world.n,):
        raise DomainError("activity costs must have one entry per UAV")
    if np.any(costs < 0):
        raise DomainError("activity costs must be non-negative")
    drained = np.zeros(world.n)
    for idx, node in enumerate(world.uavs):
        want = base_drain + costs[idx]
        drawn = min(want, node.energy.remaining)
        node.energy = EnergyState(node.energy.remaining - drawn, node.energy.capacity)
        drained[idx] = drawn
    return drained


@dataclass(frozen=True)
class LabeledSample:
    observer: int
    subject: int
    features: FeatureVector
    label: int
    round: int


def ground_truth_labels(
    world: WorldState,
    samples: Sequence[tuple[int, int, FeatureVector]],
    round: int | None = None,
) -> list[LabeledSample]:
    """Attach audit labels: 1 whenever the subject's profile is rogue.

    The label follows the profile, not the behavior shown in the sample, so
    a not-yet-turned rogue still audits as rogue.
    """
    rogues = world.rogue_ids()
    tagged = world.round if round is None else round
    return [
        LabeledSample(obs, subj, feats, 1 if subj in rogues else 0, tagged)
        for obs, subj, feats in samples
    ]


class AuditOracle:
    """Holds per-round observation samples until their audit comes due."""

    def __init__(self, audit_delay: int = DEFAULT_AUDIT_DELAY):
        if audit_delay < 0:
            raise DomainError(f"audit_delay={audit_delay!r} negative")
        self.audit_delay = audit_delay
        self._pending: deque[tuple[int, list[tuple[int, int, FeatureVector]]]] = deque()

    def push(self, round: int, samples: list[tuple[int, int, FeatureVector]]) -> None:
        self._pending.append((round, samples))

    def pop_due(self, world: WorldState, now: int) -> list[LabeledSample]:
        due: list[LabeledSample] = []
        while self._pending and self._pending[0][0] <= now - self.audit_delay:
            tagged, samples = self._pending.popleft()
            due.extend(ground_truth_labels(world, samples, tagged))
        return due
