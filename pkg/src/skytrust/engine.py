"""Shared per-round machinery behind all three evaluated methods.

Every method consumes exactly the same world: the init and traffic random
streams are seeded identically and consumed identically, so the observation
stream is bit-identical across methods for a given (config, seed). Methods
differ only in what they do with the observations, which is the point of
the comparison. A third stream covers method-internal randomness.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import netsim
from .accounting import EnergyMeter, MessageMeter
from .config import ScenarioConfig
from .fl import FeatureVector, LocalDataset, predict_proba
from .ledger import energy_charge
from .metrics import MetricsReport
from .netsim import Mesh, RoundBatch, Star, WorldState
from .trust import energy_score

KB = 1000.0


@dataclass
class SubjectRound:
    """What the network learned about one subject in one round."""

    pdr_mean: float  # probe-count weighted across observers
    rt_mean: float  # clipped per probe, weighted the same way
    probes: int
    feature_row: np.ndarray  # plain mean of the per-observer feature rows


@dataclass
class RoundData:
    round: int
    batch: RoundBatch
    features: np.ndarray  # one row per directed link
    alive_observer: np.ndarray  # sender had energy when the round began
    by_subject: dict[int, SubjectRound]
    audited: list[netsim.LabeledSample]


@dataclass
class TraceRow:
    round: int
    uav: int
    x: float
    y: float
    energy_remaining: float
    trust: float


class BaseEngine:
    """Owns the world, the meters, and the per-round evaluation loop."""

    has_ledger = False
    has_fl = False

    def __init__(self, config: ScenarioConfig, seed: int):
        self.config = config
        self.seed = seed
        init_ss, world_ss, method_ss = np.random.SeedSequence(seed).spawn(3)
        self.rng_init = np.random.default_rng(init_ss)
        self.rng_world = np.random.default_rng(world_ss)
        self.rng_method = np.random.default_rng(method_ss)

        n = config.uav_count
        rogue_ids = sorted(
            int(i)
            for i in self.rng_init.choice(n, size=config.rogue_count, replace=False)
        )
        self.onsets = self._draw_onsets(rogue_ids)
        topology = (
            Mesh(config.mesh_radius_km)
            if config.topology == "mesh"
            else Star(config.star_hub)
        )
        self.world: WorldState = netsim.build_world(
            n_uavs=n,
            rogue_ids=rogue_ids,
            onsets=self.onsets,
            users=config.user_count,
            topology=topology,
            area_side_km=config.area_side_km,
            capacity=config.energy.capacity,
            initial_trust=config.trust.initial_trust,
            rng=self.rng_init,
            poison_updates=config.profiles.poison_updates,
        )
        self._apply_profile_overrides()

        self.energy_meter = EnergyMeter(n)
        self.message_meter = MessageMeter()
        self.oracle = netsim.AuditOracle(config.audit_delay)
        self.datasets = [LocalDataset(i) for i in range(n)]
        self.validation_x: list[np.ndarray] = []
        self.validation_y: list[int] = []
        self._holdout_counter = 0
        self.transactions_committed = 0
        self.max_probes = max(
            config.profiles.honest_probes[1], config.profiles.rogue_probes[1]
        )
        self._last_raised: dict[int, int] = {}

        self.accuracy_series: list[float] = []
        self.detection_series: list[float] = []
        self.cum_energy_series: list[float] = []
        self.cum_comm_mb_series: list[float] = []
        self.fl_accuracy_series: list[float | None] = []
        self.trace_rows: list[TraceRow] = []

    # -- construction helpers -------------------------------------------------

    def _draw_onsets(self, rogue_ids: list[int]) -> dict[int, int]:
        mode = self.config.profiles.onset_mode
        if mode == "immediate" or not rogue_ids:
            return {i: 0 for i in rogue_ids}
        span = self.config.profiles.onset_span_fraction * self.config.rounds
        k = len(rogue_ids)
        onsets = {}
        for idx, uav in enumerate(rogue_ids):
            lo = int(span * idx / k)
            hi = max(int(span * (idx + 1) / k), lo + 1)
            onsets[uav] = int(self.rng_init.integers(lo, hi))
        return onsets

    def _apply_profile_overrides(self) -> None:
        p = self.config.profiles
        for node in self.world.uavs:
            prof = node.profile
            if prof.kind is netsim.UavKind.ROGUE:
                node.profile = replace(
                    prof,
                    pdr_range=p.rogue_pdr,
                    rt_range=p.rogue_rt_ms,
                    count_range=p.rogue_probes,
                    dormant_pdr_range=p.honest_pdr,
                    dormant_rt_range=p.honest_rt_ms,
                    dormant_count_range=p.honest_probes,
                )
            else:
                node.profile = replace(
                    prof,
                    pdr_range=p.honest_pdr,
                    rt_range=p.honest_rt_ms,
                    count_range=p.honest_probes,
                    dormant_pdr_range=p.honest_pdr,
                    dormant_rt_range=p.honest_rt_ms,
                    dormant_count_range=p.honest_probes,
                )

    # -- accounting helpers ----------------------------------------------------

    def charge(self, uav: int, cost: float, category: str) -> float:
        node = self.world.uavs[uav]
        node.energy, drawn = energy_charge(node.energy, cost)
        self.energy_meter.charge(uav, drawn, category)
        return drawn

    def transmit(self, uav: int, nbytes: int, category: str) -> None:
        self.message_meter.log(nbytes, category)
        self.charge(
            uav,
            nbytes / KB * self.config.energy.transmission_cost_per_kb,
            "transmission",
        )

    # -- the common per-round stream -------------------------------------------

    def _step_common(self, t: int) -> RoundData:
        cfg = self.config
        world = self.world
        world.round = t
        netsim.step_mobility(world, self.rng_world, cfg.max_speed_km_per_round)
        adjacency = netsim.build_topology(world)
        batch = netsim.generate_round_batch(
            world, adjacency, self.rng_world, cfg.trust.rt_max_ms
        )

        m = len(batch.observers)
        energies = np.array([energy_score(u.energy) for u in world.uavs])
        if m:
            features = np.column_stack(
                [
                    batch.pdr_means,
                    batch.rt_means / cfg.trust.rt_max_ms,
                    energies[batch.subjects],
                    np.minimum(batch.counts / self.max_probes, 1.0),
                ]
            )
            alive = np.array(
                [not world.uavs[o].energy.depleted for o in batch.observers]
            )
        else:
            features = np.empty((0, 4))
            alive = np.empty(0, dtype=bool)

        by_subject: dict[int, SubjectRound] = {}
        for subject in np.unique(batch.subjects[alive]) if m else []:
            mask = alive & (batch.subjects == subject)
            counts = batch.counts[mask]
            total = counts.sum()
            by_subject[int(subject)] = SubjectRound(
                pdr_mean=float((batch.pdr_means[mask] * counts).sum() / total),
                rt_mean=float((batch.rt_means[mask] * counts).sum() / total),
                probes=int(total),
                feature_row=features[mask].mean(axis=0),
            )

        samples = [
            (
                int(batch.observers[i]),
                int(batch.subjects[i]),
                FeatureVector(*np.clip(features[i], 0.0, 1.0)),
            )
            for i in range(m)
        ]
        self.oracle.push(t, samples)
        audited = self.oracle.pop_due(world, t)
        return RoundData(
            round=t,
            batch=batch,
            features=features,
            alive_observer=alive,
            by_subject=by_subject,
            audited=audited,
        )

    def _route_audited(self, audited: Sequence[netsim.LabeledSample]):
        """Split audited samples between training owners and the held-out set."""
        kept = []
        stride = self.config.fl.holdout_stride
        for sample in audited:
            self._holdout_counter += 1
            if stride > 0 and self._holdout_counter % stride == 0:
                self.validation_x.append(sample.features.as_array())
                self.validation_y.append(sample.label)
            else:
                kept.append(sample)
        return kept

    def validation_arrays(self) -> tuple[np.ndarray, np.ndarray] | None:
        if not self.validation_y:
            return None
        return np.vstack(self.validation_x), np.array(self.validation_y, dtype=float)

    # -- flags ------------------------------------------------------------------

    def _remember_flags(self, t: int, raw: dict[int, bool]) -> set[int]:
        memory = max(self.config.detection.flag_memory, 1)
        for uav, hot in raw.items():
            if hot:
                self._last_raised[uav] = t
        return {
            uav
            for uav, last in self._last_raised.items()
            if t - last < memory
        }

    # -- per-round bookkeeping ---------------------------------------------------

    def _record_round(self, t: int, flagged: set[int], fl_accuracy: float | None):
        world = self.world
        rogues = world.rogue_ids()
        truth = [1 if u.profile.id in rogues else 0 for u in world.uavs]
        predicted = [1 if u.profile.id in flagged else 0 for u in world.uavs]
        correct = sum(1 for p, y in zip(predicted, truth) if p == y)
        self.accuracy_series.append(correct / world.n)
        if rogues:
            self.detection_series.append(len(flagged & rogues) / len(rogues))
        units = self.config.energy.units_to_joules
        self.cum_energy_series.append(self.energy_meter.method_total() * units)
        self.cum_comm_mb_series.append(
            self.message_meter.total_bytes() / world.n / 1e6
        )
        self.fl_accuracy_series.append(fl_accuracy)
        if self.config.export_trace:
            for u in world.uavs:
                self.trace_rows.append(
                    TraceRow(
                        round=t,
                        uav=u.profile.id,
                        x=float(u.position[0]),
                        y=float(u.position[1]),
                        energy_remaining=u.energy.remaining,
                        trust=u.trust.score,
                    )
                )

    def _drain_base(self):
        drained = netsim.deplete_energy(
            self.world, None, self.config.energy.base_drain
        )
        for uav, drawn in enumerate(drained):
            self.energy_meter.charge(uav, float(drawn), "base")

    # -- main loop -----------------------------------------------------------------

    def method_round(self, t: int, data: RoundData) -> tuple[set[int], float | None]:
        raise NotImplementedError

    def convergence_rounds(self) -> int | None:
        return None

    def run(self) -> MetricsReport:
        cfg = self.config
        for t in range(cfg.rounds):
            data = self._step_common(t)
            flagged, fl_acc = self.method_round(t, data)
            self._record_round(t, flagged, fl_acc)
            self._drain_base()
        return self._build_report()

    # -- report ----------------------------------------------------------------------

    def _eval_slice(self, series: list[float]) -> float:
        start = int(len(series) * (1.0 - self.config.detection.eval_window_fraction))
        window = series[start:] or series
        return float(np.mean(window)) if window else 0.0

    def _build_report(self) -> MetricsReport:
        cfg = self.config
        units = cfg.energy.units_to_joules
        method_joules = self.energy_meter.method_total() * units
        txs = self.transactions_committed
        report = MetricsReport(
            method=cfg.method,
            seed=self.seed,
            accuracy=self._eval_slice(self.accuracy_series),
            detection_rate=(
                self._eval_slice(self.detection_series)
                if self.detection_series
                else 0.0
            ),
            comm_overhead_mb_per_uav=self.message_meter.total_bytes()
            / self.world.n
            / 1e6,
            energy_per_transaction=(method_joules / txs) if txs else 0.0,
            convergence_rounds=self.convergence_rounds(),
            accuracy_series=self.accuracy_series,
            detection_series=self.detection_series,
            cumulative_energy_series=self.cum_energy_series,
            cumulative_comm_mb_series=self.cum_comm_mb_series,
            fl_accuracy_series=self.fl_accuracy_series,
            totals={
                "energy_joules_by_category": {
                    k: v * units for k, v in sorted(self.energy_meter.by_category.items())
                },
                "comm_bytes_by_category": dict(
                    sorted(self.message_meter.by_category.items())
                ),
                "transactions": txs,
                "rogue_ids": sorted(self.world.rogue_ids()),
                "rogue_onsets": {str(k): v for k, v in sorted(self.onsets.items())},
            },
        )
        return report


class WindowedModelFlagger:
    """Rogue-probability windows per subject for model-based flagging."""

    def __init__(self, n_uavs: int, window: int):
        self.rows = [deque(maxlen=window) for _ in range(n_uavs)]

    def push(self, subject: int, row: np.ndarray) -> None:
        self.rows[subject].append(row)

    def mean_rogue_prob(self, subject: int, params) -> float | None:
        rows = self.rows[subject]
        if not rows:
            return None
        return float(np.mean(predict_proba(params, np.vstack(rows))))
