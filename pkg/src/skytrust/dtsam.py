"""The proposed method: dynamic trust, lottery consensus, federated trust model.

Per round: refresh every UAV's trust from its observed behavior and battery,
run one federated training round while the global model is still moving,
then let a trust-and-energy weighted lottery pick the validator that seals
the round's trust updates (and the model digest, on training rounds) into
the chain.

Detection combines two arms: the dynamic trust score dropping under the
rogue threshold, or the shared model assigning a confidently high rogue
probability to the subject's recent observations. The confidence gate is
what makes detection sensitive to a degraded (poisoned) global model, which
an ordinary 0.5 vote would hide.
"""

from __future__ import annotations

import struct

import numpy as np

from . import fl, ledger, trust
from .config import ScenarioConfig
from .engine import BaseEngine, KB, RoundData, WindowedModelFlagger
from .metrics import MetricsReport


class DtsamEngine(BaseEngine):
    has_ledger = True
    has_fl = True

    def __init__(self, config: ScenarioConfig, seed: int):
        super().__init__(config, seed)
        self.ledger = ledger.Ledger.with_genesis()
        self.global_params = fl.ModelParams.zeros(fl.N_FEATURES)
        self.fl_state = fl.FLRoundState(epsilon=config.fl.epsilon)
        self.fl_rounds_run = 0
        self.fl_frozen = False
        self.accuracy_at_freeze: float | None = None
        self._convergence_rounds: int | None = None
        self.train_config = fl.TrainConfig(
            config.fl.learning_rate, config.fl.epochs, config.fl.class_balance
        )
        self.flagger = WindowedModelFlagger(config.uav_count, config.detection.flag_window)
        self.model_ready = False
        self.skipped_blocks = 0

    # -- trust ------------------------------------------------------------------

    def _update_trust_scores(self, t: int, data: RoundData) -> None:
        cfg = self.config.trust
        weights = cfg.trust_weights()
        bweights = cfg.behavior_weights()
        for node in self.world.uavs:
            uav = node.profile.id
            seen = data.by_subject.get(uav)
            if seen is None:
                behavior = cfg.neutral_behavior  # idle node, no observations
            else:
                behavior = trust.behavior_score_from_means(
                    seen.pdr_mean, seen.rt_mean, cfg.rt_max_ms, bweights
                )
            energy = trust.energy_score(node.energy)
            node.trust.record(
                t, trust.update_trust(node.trust.score, behavior, energy, weights)
            )

    # -- federated step ------------------------------------------------------------

    def _monitor_accuracy(self) -> float | None:
        arrays = self.validation_arrays()
        if arrays is None:
            return None
        x, y = arrays
        predicted = (fl.predict_proba(self.global_params, x) > 0.5).astype(float)
        return float(np.mean(predicted == y))

    def _fl_step(self, t: int) -> tuple[bytes | None, float | None]:
        cfg = self.config
        monitored = self._monitor_accuracy()
        if self.fl_rounds_run >= cfg.fl.max_fl_rounds:
            if self._convergence_rounds is None:
                self._convergence_rounds = cfg.fl.max_fl_rounds
            return None, monitored
        if self.fl_frozen:
            # The frozen model is only trusted while it still matches the
            # held-out stream; meaningful drift resumes training.
            if (
                monitored is not None
                and self.accuracy_at_freeze is not None
                and abs(monitored - self.accuracy_at_freeze) >= cfg.fl.epsilon
            ):
                self.fl_frozen = False
            else:
                return None, monitored
        if all(d.size == 0 for d in self.datasets):
            return None, monitored

        participants = [
            (self.datasets[i], node.trust, node.energy)
            for i, node in enumerate(self.world.uavs)
        ]
        poisoned = [node.profile.poisoning_at(t) for node in self.world.uavs]
        mode = (
            fl.AggregationMode.TRUST_WEIGHTED
            if cfg.fl.aggregation == "trust_weighted"
            else fl.AggregationMode.FEDAVG
        )
        try:
            result = fl.run_fl_round(
                participants,
                self.global_params,
                mode,
                self.train_config,
                cfg.comm.envelope_bytes,
                poisoned,
            )
        except fl.RoundSkipped:
            return None, monitored
        if result.trained == 0:
            return None, monitored

        self.global_params = result.params
        self.model_ready = True
        self.fl_rounds_run += 1
        for uav, nbytes in sorted(result.bytes_per_uav.items()):
            self.transmit(uav, nbytes, "fl_params")

        accuracy = self._monitor_accuracy()
        if accuracy is not None:
            self.fl_state.round = self.fl_rounds_run
            self.fl_state.accuracy_history.append(accuracy)
            # during warm-up the accuracy plateau of an untrained model must
            # not be mistaken for convergence
            if self.fl_rounds_run >= cfg.fl.convergence_warmup_rounds and fl.has_converged(
                self.fl_state
            ):
                self.fl_frozen = True
                self.accuracy_at_freeze = accuracy
                if self._convergence_rounds is None:
                    self._convergence_rounds = self.fl_rounds_run
        return self.global_params.digest(), accuracy

    # -- consensus ---------------------------------------------------------------

    def _seal_block(self, t: int, data: RoundData, model_digest: bytes | None) -> None:
        cfg = self.config
        txs = []
        report_bytes_total = 0
        for node in self.world.uavs:
            uav = node.profile.id
            txs.append(
                ledger.Transaction(
                    kind=ledger.TxKind.TRUST_UPDATE,
                    subject=uav,
                    payload=struct.pack(">d", node.trust.score),
                    round=t,
                )
            )
            if node.energy.depleted:
                continue
            observed = int((data.alive_observer & (data.batch.observers == uav)).sum())
            if observed:
                nbytes = observed * cfg.comm.report_entry_bytes + cfg.comm.envelope_bytes
                report_bytes_total += nbytes
                self.transmit(uav, nbytes, "trust_report")
        if model_digest is not None:
            txs.append(
                ledger.Transaction(
                    kind=ledger.TxKind.MODEL_DIGEST,
                    subject=ledger.GENESIS_VALIDATOR,
                    payload=model_digest,
                    round=t,
                )
            )

        candidates = [
            (n.profile.id, n.trust.score, trust.energy_score(n.energy))
            for n in self.world.uavs
            if not n.energy.depleted
        ]
        if not candidates:
            self.skipped_blocks += 1
            return
        lottery = ledger.ValidatorLottery.from_entries(candidates)
        validator = ledger.select_validator(lottery, self.rng_method)
        block = ledger.append_block(self.ledger, txs, validator, t)
        block_bytes = sum(
            len(tx.payload) + cfg.comm.envelope_bytes for tx in block.transactions
        )
        self.message_meter.log(block_bytes, "block")
        processed_kb = (block_bytes + report_bytes_total) / KB
        self.charge(
            validator,
            cfg.energy.validation_cost + cfg.energy.validation_cost_per_kb * processed_kb,
            "validation",
        )
        self.transactions_committed += len(block.transactions)

    # -- detection ----------------------------------------------------------------

    def _flags(self, t: int, data: RoundData) -> set[int]:
        cfg = self.config
        raw = {}
        for node in self.world.uavs:
            uav = node.profile.id
            seen = data.by_subject.get(uav)
            if seen is not None:
                self.flagger.push(uav, seen.feature_row)
            trust_arm = (
                trust.classify(node.trust.score, cfg.trust.rogue_threshold)
                is trust.Classification.ROGUE
            )
            model_arm = False
            if self.model_ready:
                prob = self.flagger.mean_rogue_prob(uav, self.global_params)
                model_arm = (
                    prob is not None and prob > cfg.detection.model_flag_threshold
                )
            raw[uav] = trust_arm or model_arm
        return self._remember_flags(t, raw)

    # -- round --------------------------------------------------------------------

    def method_round(self, t: int, data: RoundData) -> tuple[set[int], float | None]:
        for sample in self._route_audited(data.audited):
            self.datasets[sample.observer].add(sample.features, sample.label)
        self._update_trust_scores(t, data)
        model_digest, fl_accuracy = self._fl_step(t)
        self._seal_block(t, data, model_digest)
        return self._flags(t, data), fl_accuracy

    def convergence_rounds(self) -> int | None:
        return self._convergence_rounds

    def _build_report(self) -> MetricsReport:
        report = super()._build_report()
        report.totals["blocks"] = len(self.ledger)
        report.totals["fl_rounds"] = self.fl_rounds_run
        report.totals["skipped_blocks"] = self.skipped_blocks
        return report


def run_dtsam(config: ScenarioConfig, seed: int | None = None) -> MetricsReport:
    engine = DtsamEngine(config, config.seed if seed is None else seed)
    report = engine.run()
    report.totals["engine"] = "dtsam"
    return report
