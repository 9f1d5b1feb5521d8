"""The two comparison systems: centralized evaluation and static-trust chain.

CTE ships every raw observation record to one central server, which keeps a
single pooled logistic model and classifies from it. Uploads ride a
long-haul link: they cost real energy and arrive after a configurable lag,
so the server's picture of the network always trails the network itself.

SBST keeps a ledger like the proposed method but freezes trust at its
initial value, schedules validators round-robin regardless of battery, and
classifies with a fixed threshold on each node's cumulative delivery ratio,
which reacts to a behavior change only as fast as a lifetime average can.
"""

from __future__ import annotations

import hashlib
from collections import deque

import numpy as np

from . import fl, ledger
from .config import ScenarioConfig
from .engine import BaseEngine, KB, RoundData, WindowedModelFlagger
from .metrics import MetricsReport
from .netsim import LabeledSample


class CteEngine(BaseEngine):
    """Centralized trust evaluation: raw records to one server, no chain."""

    def __init__(self, config: ScenarioConfig, seed: int):
        super().__init__(config, seed)
        self.server_model = fl.ModelParams.zeros(fl.N_FEATURES)
        self.server_pool = fl.LocalDataset(owner=-1)
        self.train_config = fl.TrainConfig(
            config.fl.learning_rate, config.fl.epochs, config.fl.class_balance
        )
        self.model_ready = False
        self.flagger = WindowedModelFlagger(config.uav_count, config.detection.flag_window)
        # observations in flight to the server: (observation round, rows)
        self._feature_transit: deque[tuple[int, dict[int, np.ndarray]]] = deque()
        # audited samples wait here until their records have also arrived
        self._label_transit: deque[tuple[int, LabeledSample]] = deque()
        self._uploaded: set[tuple[int, int]] = set()  # (round, observer)
        self._stale_flags: dict[int, bool] = {}

    def _upload(self, t: int, data: RoundData) -> None:
        cfg = self.config
        for node in self.world.uavs:
            uav = node.profile.id
            if node.energy.depleted:
                continue
            mask = data.alive_observer & (data.batch.observers == uav)
            records = int(data.batch.counts[mask].sum())
            if records == 0:
                continue
            nbytes = records * cfg.comm.record_wire_bytes
            self.transmit(uav, nbytes, "central_upload")
            self.charge(uav, cfg.energy.central_upload_cost, "upload")
            self.transactions_committed += 1  # one server submission
            self._uploaded.add((t, uav))

    def _receive(self, t: int, data: RoundData) -> None:
        """Feed the server everything whose uplink lag has elapsed."""
        lag = self.config.detection.central_uplink_lag
        subject_rows: dict[int, np.ndarray] = {}
        uploaded_mask = np.array(
            [
                (t, int(o)) in self._uploaded
                for o in data.batch.observers
            ]
        ) if len(data.batch.observers) else np.empty(0, dtype=bool)
        for subject in (
            np.unique(data.batch.subjects[uploaded_mask])
            if len(data.batch.observers)
            else []
        ):
            mask = uploaded_mask & (data.batch.subjects == subject)
            subject_rows[int(subject)] = data.features[mask].mean(axis=0)
        self._feature_transit.append((t, subject_rows))

        while self._feature_transit and self._feature_transit[0][0] <= t - lag:
            _, rows = self._feature_transit.popleft()
            for subject, row in sorted(rows.items()):
                self.flagger.push(subject, row)

        for sample in self._route_audited(data.audited):
            if (sample.round, sample.observer) in self._uploaded:
                self._label_transit.append(
                    (max(sample.round + lag, t), sample)
                )
        while self._label_transit and self._label_transit[0][0] <= t:
            _, sample = self._label_transit.popleft()
            self.server_pool.add(sample.features, sample.label)

    def _train(self) -> None:
        if self.server_pool.size == 0:
            return
        result = fl.train_local(self.server_pool, self.server_model, self.train_config)
        self.server_model = result.params
        self.model_ready = True

    def _flags(self, t: int) -> set[int]:
        threshold = self.config.detection.central_flag_threshold
        raw = {}
        for node in self.world.uavs:
            uav = node.profile.id
            if not self.model_ready:
                raw[uav] = False
                continue
            prob = self.flagger.mean_rogue_prob(uav, self.server_model)
            if prob is None:
                raw[uav] = self._stale_flags.get(uav, False)
            else:
                raw[uav] = prob > threshold
            self._stale_flags[uav] = raw[uav]
        return self._remember_flags(t, raw)

    def method_round(self, t: int, data: RoundData) -> tuple[set[int], float | None]:
        self._upload(t, data)
        self._receive(t, data)
        self._train()
        return self._flags(t), None


class SbstEngine(BaseEngine):
    """Standard chain with static trust and a fixed validator rotation."""

    has_ledger = True

    def __init__(self, config: ScenarioConfig, seed: int):
        super().__init__(config, seed)
        self.ledger = ledger.Ledger.with_genesis()
        self.cum_pdr_sum = np.zeros(config.uav_count)
        self.cum_probes = np.zeros(config.uav_count, dtype=int)
        self.failed_validations = 0
        self.validator_sequence: list[int] = []

    def method_round(self, t: int, data: RoundData) -> tuple[set[int], float | None]:
        cfg = self.config
        self._route_audited(data.audited)  # audits exist but nothing learns from them

        # static trust: re-record the initial score so traces stay flat
        for node in self.world.uavs:
            node.trust.record(t, cfg.trust.initial_trust)

        txs = []
        batch_bytes_total = 0
        round_pdr_sum = np.zeros(self.world.n)
        round_probes = np.zeros(self.world.n, dtype=int)
        for node in self.world.uavs:
            uav = node.profile.id
            if node.energy.depleted:
                continue
            mask = data.alive_observer & (data.batch.observers == uav)
            records = int(data.batch.counts[mask].sum())
            if records == 0:
                continue
            nbytes = records * cfg.comm.packed_record_bytes + cfg.comm.envelope_bytes
            batch_bytes_total += nbytes
            self.transmit(uav, nbytes, "batch_report")
            digest = hashlib.sha256(
                np.ascontiguousarray(data.batch.pdr_means[mask]).tobytes()
            ).digest()
            txs.append(
                ledger.Transaction(
                    kind=ledger.TxKind.INTERACTION_BATCH_DIGEST,
                    subject=uav,
                    payload=digest,
                    round=t,
                )
            )
            np.add.at(
                round_pdr_sum,
                data.batch.subjects[mask],
                data.batch.pdr_means[mask] * data.batch.counts[mask],
            )
            np.add.at(round_probes, data.batch.subjects[mask], data.batch.counts[mask])

        validator = t % self.world.n  # the schedule ignores battery state
        self.validator_sequence.append(validator)
        committed = False
        if txs:
            block_bytes = sum(
                len(tx.payload) + cfg.comm.envelope_bytes for tx in txs
            )
            cost = cfg.energy.validation_cost + cfg.energy.validation_cost_per_kb * (
                (block_bytes + batch_bytes_total) / KB
            )
            drawn = self.charge(validator, cost, "validation")
            if drawn >= cost:  # a brown-out validator burns energy but seals nothing
                block = ledger.append_block(self.ledger, txs, validator, t)
                self.message_meter.log(block_bytes, "block")
                self.transactions_committed += len(block.transactions)
                committed = True
            else:
                self.failed_validations += 1

        if committed:
            self.cum_pdr_sum += round_pdr_sum
            self.cum_probes += round_probes

        flagged = set()
        threshold = cfg.detection.static_pdr_threshold
        for uav in range(self.world.n):
            if self.cum_probes[uav] == 0:
                continue
            if self.cum_pdr_sum[uav] / self.cum_probes[uav] < threshold:
                flagged.add(uav)
        return flagged, None

    def _build_report(self) -> MetricsReport:
        report = super()._build_report()
        report.totals["blocks"] = len(self.ledger)
        report.totals["failed_validations"] = self.failed_validations
        return report


def run_cte(config: ScenarioConfig, seed: int | None = None) -> MetricsReport:
    engine = CteEngine(config, config.seed if seed is None else seed)
    return engine.run()


def run_sbst(config: ScenarioConfig, seed: int | None = None) -> MetricsReport:
    engine = SbstEngine(config, config.seed if seed is None else seed)
    return engine.run()
