"""Experiment orchestration: seeded runs, result files, and seed sweeps.

Output layout per run (under `<out>/<run-id>/`, run-id a hash of config and
seed so identical requests land in identical places):

    summary.json   scalar metrics, totals, and the fully materialized config
    rounds.csv     one row per round: the documented time series
    ledger.ndjson  the exported chain, for methods that keep one
    trace.csv      per-round world state, only when tracing is enabled

Everything written here is a pure function of (config, seed): no clocks,
no machine identifiers.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import statistics
from pathlib import Path
from typing import Sequence

from . import ledger as ledger_mod
from .baselines import CteEngine, SbstEngine
from .config import ConfigError, ScenarioConfig
from .dtsam import DtsamEngine
from .engine import BaseEngine
from .metrics import METHOD_LABELS, TABLE_ROWS, MetricsReport

SCHEMA_VERSION = 1

ROUNDS_CSV_COLUMNS = (
    "round",
    "accuracy",
    "detection_rate",
    "cumulative_energy_joules",
    "cumulative_comm_mb_per_uav",
    "fl_accuracy",
)

_ENGINES = {"dtsam": DtsamEngine, "cte": CteEngine, "sbst": SbstEngine}


def run_id(config: ScenarioConfig, seed: int) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(f"{canonical}|{seed}".encode()).hexdigest()[:12]


def build_engine(config: ScenarioConfig, seed: int | None = None) -> BaseEngine:
    try:
        engine_cls = _ENGINES[config.method]
    except KeyError:
        raise ConfigError(f"method={config.method!r} unknown") from None
    return engine_cls(config, config.seed if seed is None else seed)


def run_experiment(
    config: ScenarioConfig,
    seed: int | None = None,
    out_dir: str | Path | None = None,
) -> MetricsReport:
    """Run one method end to end; optionally write its result files."""
    seed = config.seed if seed is None else seed
    engine = build_engine(config, seed)
    report = engine.run()
    if out_dir is not None:
        write_run_outputs(Path(out_dir), config, seed, engine, report)
    return report


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return f"{value:.10g}"


def write_run_outputs(
    out_dir: Path,
    config: ScenarioConfig,
    seed: int,
    engine: BaseEngine,
    report: MetricsReport,
) -> Path:
    rid = run_id(config, seed)
    run_dir = out_dir / rid
    run_dir.mkdir(parents=True, exist_ok=True)

    summary = {
        "schema_version": SCHEMA_VERSION,
        "run_id": rid,
        "method": config.method,
        "seed": seed,
        "metrics": report.scalars(),
        "totals": report.totals,
        "config": config.to_dict(),
    }
    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    with open(run_dir / "rounds.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUNDS_CSV_COLUMNS)
        for t in range(len(report.accuracy_series)):
            detection = (
                report.detection_series[t] if report.detection_series else None
            )
            writer.writerow(
                [
                    t,
                    _fmt(report.accuracy_series[t]),
                    _fmt(detection),
                    _fmt(report.cumulative_energy_series[t]),
                    _fmt(report.cumulative_comm_mb_series[t]),
                    _fmt(report.fl_accuracy_series[t]),
                ]
            )

    if engine.has_ledger:
        (run_dir / "ledger.ndjson").write_text(
            ledger_mod.to_ndjson(engine.ledger), encoding="utf-8"
        )

    if config.export_trace:
        with open(run_dir / "trace.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(("round", "uav", "x_km", "y_km", "energy_remaining", "trust"))
            for row in engine.trace_rows:
                writer.writerow(
                    [
                        row.round,
                        row.uav,
                        _fmt(row.x),
                        _fmt(row.y),
                        _fmt(row.energy_remaining),
                        _fmt(row.trust),
                    ]
                )
    return run_dir


# -- sweeps ---------------------------------------------------------------------


def sweep(
    config: ScenarioConfig,
    seeds: Sequence[int],
    methods: Sequence[str] = ("dtsam", "cte", "sbst"),
    out_dir: str | Path | None = None,
) -> dict[str, list[MetricsReport]]:
    """Run every (method, seed) pair on the same scenario."""
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    results: dict[str, list[MetricsReport]] = {}
    for method in methods:
        if method not in _ENGINES:
            raise ConfigError(f"method={method!r} unknown")
        method_config = dataclasses.replace(config, method=method)
        reports = []
        for seed in sorted(seeds):
            method_config_seeded = dataclasses.replace(method_config, seed=seed)
            report = run_experiment(method_config_seeded, seed, out_dir)
            reports.append(report)
        results[method] = reports
    if out_dir is not None:
        write_sweep_outputs(Path(out_dir), config, sorted(seeds), results)
    return results


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.pstdev(values) if len(values) > 1 else 0.0
    return mean, std


def aggregate(reports: Sequence[MetricsReport]) -> dict[str, tuple[float, float]]:
    """Mean and population std of each scalar metric across seeds."""
    agg: dict[str, tuple[float, float]] = {}
    agg["accuracy"] = _mean_std([r.accuracy for r in reports])
    agg["detection_rate"] = _mean_std([r.detection_rate for r in reports])
    agg["comm_overhead_mb_per_uav"] = _mean_std(
        [r.comm_overhead_mb_per_uav for r in reports]
    )
    agg["energy_per_transaction_joules"] = _mean_std(
        [r.energy_per_transaction for r in reports]
    )
    convergences = [
        r.convergence_rounds for r in reports if r.convergence_rounds is not None
    ]
    if convergences:
        agg["convergence_rounds"] = _mean_std([float(c) for c in convergences])
    return agg


# maps a display row to (metric key, render-as-percent)
_ROW_SPEC = {
    "Accuracy in Trust Score Prediction (%)": ("accuracy", True),
    "Communication Overhead (MB per UAV)": ("comm_overhead_mb_per_uav", False),
    "Energy Consumption (Joules per Transaction)": (
        "energy_per_transaction_joules",
        False,
    ),
    "Convergence Time (Iterations)": ("convergence_rounds", False),
    "Rogue UAV Detection Rate (%)": ("detection_rate", True),
}


def write_sweep_outputs(
    out_dir: Path,
    config: ScenarioConfig,
    seeds: Sequence[int],
    results: dict[str, list[MetricsReport]],
) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregates = {method: aggregate(reports) for method, reports in results.items()}

    table_path = out_dir / "table.csv"
    methods = list(results)
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["Metric"]
        for method in methods:
            label = METHOD_LABELS.get(method, method)
            header.extend([label, f"{label} std"])
        writer.writerow(header)
        for row_label in TABLE_ROWS:
            key, as_percent = _ROW_SPEC[row_label]
            row = [row_label]
            for method in methods:
                stats = aggregates[method].get(key)
                if stats is None:
                    row.extend(["N/A", ""])
                    continue
                mean, std = stats
                scale = 100.0 if as_percent else 1.0
                row.extend([f"{mean * scale:.6g}", f"{std * scale:.6g}"])
            writer.writerow(row)

    sweep_summary = {
        "schema_version": SCHEMA_VERSION,
        "scenario": config.name,
        "seeds": list(seeds),
        "methods": methods,
        "aggregates": {
            method: {key: {"mean": m, "std": s} for key, (m, s) in agg.items()}
            for method, agg in aggregates.items()
        },
        "runs": {
            method: [
                run_id(
                    dataclasses.replace(config, method=method, seed=seed), seed
                )
                for seed in seeds
            ]
            for method in methods
        },
        "config": config.to_dict(),
    }
    (out_dir / "sweep_summary.json").write_text(
        json.dumps(sweep_summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return table_path
