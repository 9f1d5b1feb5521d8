import csv
import dataclasses
import json

import pytest

from skytrust.cli import main as cli_main
from skytrust.config import preset
from skytrust.harness import (
    ROUNDS_CSV_COLUMNS,
    build_engine,
    run_experiment,
    run_id,
    sweep,
)
from skytrust.ledger import to_ndjson, verify_chain
from skytrust.metrics import TABLE_ROWS


def small(method="dtsam", rounds=10, **kw):
    cfg = preset("desk-default")
    return dataclasses.replace(
        cfg, method=method, uav_count=8, rogue_fraction=0.25, rounds=rounds, **kw
    )


def read(path):
    return path.read_bytes()


# --- determinism -------------------------------------------------------------------


def test_same_config_seed_identical_output_files(tmp_path):
    cfg = small()
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_experiment(cfg, seed=3, out_dir=out_a)
    run_experiment(cfg, seed=3, out_dir=out_b)
    rid = run_id(cfg, 3)
    for name in ("summary.json", "rounds.csv", "ledger.ndjson"):
        assert read(out_a / rid / name) == read(out_b / rid / name)


def test_different_seed_different_run_id():
    cfg = small()
    assert run_id(cfg, 0) != run_id(cfg, 1)
    assert run_id(cfg, 0) == run_id(cfg, 0)


def test_reports_equal_across_repeat_runs():
    cfg = small()
    a = run_experiment(cfg, seed=7)
    b = run_experiment(cfg, seed=7)
    assert a.scalars() == b.scalars()
    assert a.accuracy_series == b.accuracy_series
    assert a.detection_series == b.detection_series


# --- run outputs ----------------------------------------------------------------------


def test_run_layout_and_summary_contents(tmp_path):
    cfg = small()
    report = run_experiment(cfg, seed=1, out_dir=tmp_path)
    rid = run_id(cfg, 1)
    run_dir = tmp_path / rid
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["run_id"] == rid
    assert summary["method"] == "dtsam"
    assert summary["seed"] == 1
    assert summary["config"]["fl"]["learning_rate"] == cfg.fl.learning_rate
    assert summary["metrics"]["accuracy"] == report.accuracy
    with open(run_dir / "rounds.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == ROUNDS_CSV_COLUMNS
    assert len(rows) == cfg.rounds + 1


def test_exported_ledger_verifies(tmp_path):
    cfg = small()
    run_experiment(cfg, seed=2, out_dir=tmp_path)
    from skytrust.ledger import from_ndjson

    text = (tmp_path / run_id(cfg, 2) / "ledger.ndjson").read_text()
    ledger = from_ndjson(text)
    assert verify_chain(ledger).valid
    assert to_ndjson(ledger) == text


def test_trace_export_flag(tmp_path):
    cfg = small(export_trace=True, rounds=4)
    run_experiment(cfg, seed=0, out_dir=tmp_path)
    trace = (tmp_path / run_id(cfg, 0) / "trace.csv").read_text().splitlines()
    assert trace[0] == "round,uav,x_km,y_km,energy_remaining,trust"
    assert len(trace) == 1 + 4 * cfg.uav_count


def test_world_trace_bit_identical_across_repeats(tmp_path):
    cfg = small(export_trace=True, rounds=6)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_experiment(cfg, seed=9, out_dir=out_a)
    run_experiment(cfg, seed=9, out_dir=out_b)
    rid = run_id(cfg, 9)
    assert read(out_a / rid / "trace.csv") == read(out_b / rid / "trace.csv")


def test_central_overhead_scales_with_traffic_but_fl_overhead_does_not():
    """Doubling probe volume doubles raw-record uplink; parameter traffic
    and chain traffic stay put."""
    from skytrust.config import preset

    base_profiles = preset("desk-default").profiles
    dense_profiles = dataclasses.replace(
        base_profiles, honest_probes=(80, 120), rogue_probes=(30, 90)
    )

    def overheads(profiles):
        cfg = small(method="cte", rounds=10, profiles=profiles)
        cte = run_experiment(cfg, seed=3)
        dt = run_experiment(dataclasses.replace(cfg, method="dtsam"), seed=3)
        dt_fixed = (
            dt.totals["comm_bytes_by_category"]["fl_params"]
            + dt.totals["comm_bytes_by_category"]["block"]
        )
        return cte.comm_overhead_mb_per_uav, dt_fixed

    cte_low, dtsam_low = overheads(base_profiles)
    cte_high, dtsam_high = overheads(dense_profiles)
    assert cte_high / cte_low > 1.7
    assert dtsam_high / dtsam_low < 1.1


def test_cte_emits_no_ledger(tmp_path):
    cfg = small(method="cte")
    run_experiment(cfg, seed=0, out_dir=tmp_path)
    assert not (tmp_path / run_id(cfg, 0) / "ledger.ndjson").exists()


# --- accounting conservation ---------------------------------------------------------------


@pytest.mark.parametrize("method", ["dtsam", "cte", "sbst"])
def test_energy_conservation(method):
    """Joules billed to the meter equal joules missing from the batteries."""
    cfg = small(method=method, rounds=12)
    engine = build_engine(cfg, seed=5)
    engine.run()
    missing = sum(
        node.energy.capacity - node.energy.remaining for node in engine.world.uavs
    )
    assert missing == pytest.approx(engine.energy_meter.total(), abs=1e-9)
    per_uav = sum(engine.energy_meter.per_uav)
    assert per_uav == pytest.approx(engine.energy_meter.total(), abs=1e-9)


@pytest.mark.parametrize("method", ["dtsam", "cte", "sbst"])
def test_comm_overhead_equals_logged_bytes(method):
    cfg = small(method=method, rounds=12)
    engine = build_engine(cfg, seed=5)
    report = engine.run()
    logged = engine.message_meter.total_bytes()
    assert report.comm_overhead_mb_per_uav == pytest.approx(
        logged / cfg.uav_count / 1e6, abs=1e-15
    )
    assert report.totals["comm_bytes_by_category"] == dict(engine.message_meter.by_category)


def test_energy_metric_reconciles_with_meter():
    cfg = small(method="dtsam", rounds=12)
    engine = build_engine(cfg, seed=5)
    report = engine.run()
    method_joules = engine.energy_meter.method_total() * cfg.energy.units_to_joules
    assert report.energy_per_transaction == pytest.approx(
        method_joules / report.totals["transactions"], abs=1e-12
    )


def test_dtsam_bill_of_bytes(tmp_path):
    """Hand-sum the byte bill from the exported ledger and run totals."""
    from skytrust.ledger import from_ndjson

    # complete mesh: every UAV observes every round, so every UAV holds
    # data and battery from the first training round on
    cfg = small(method="dtsam", rounds=15, mesh_radius_km=5.0)
    report = run_experiment(cfg, seed=6, out_dir=tmp_path)
    ledger = from_ndjson((tmp_path / run_id(cfg, 6) / "ledger.ndjson").read_text())

    env = cfg.comm.envelope_bytes
    block_bytes = sum(
        sum(len(tx.payload) + env for tx in block.transactions)
        for block in ledger.blocks[1:]
    )
    fl_rounds = report.totals["fl_rounds"]
    fl_bytes = fl_rounds * cfg.uav_count * (5 * 8 + env)
    categories = report.totals["comm_bytes_by_category"]
    assert categories["block"] == block_bytes
    assert categories["fl_params"] == fl_bytes
    expected_total = block_bytes + fl_bytes + categories["trust_report"]
    assert report.comm_overhead_mb_per_uav == pytest.approx(
        expected_total / cfg.uav_count / 1e6, abs=1e-15
    )


def test_dtsam_convergence_is_finite_and_capped():
    cfg = small(method="dtsam", rounds=25)
    report = run_experiment(cfg, seed=2)
    assert report.convergence_rounds is not None
    assert 1 <= report.convergence_rounds <= cfg.fl.max_fl_rounds


# --- sweep ------------------------------------------------------------------------------


def test_sweep_single_seed_zero_std(tmp_path):
    cfg = small(rounds=8)
    results = sweep(cfg, seeds=[4], methods=["dtsam", "cte"], out_dir=tmp_path)
    from skytrust.harness import aggregate

    for method, reports in results.items():
        agg = aggregate(reports)
        assert agg["accuracy"][0] == reports[0].accuracy
        assert agg["accuracy"][1] == 0.0


def test_sweep_table_mirrors_reference_row_labels(tmp_path):
    cfg = small(rounds=8)
    sweep(cfg, seeds=[0, 1], methods=["dtsam", "cte", "sbst"], out_dir=tmp_path)
    with open(tmp_path / "table.csv") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == list(TABLE_ROWS)
    assert rows[0][:3] == ["Metric", "DTSAM-EAC", "DTSAM-EAC std"]
    convergence = rows[4]
    assert convergence[0] == "Convergence Time (Iterations)"
    assert convergence[3] == "N/A" and convergence[5] == "N/A"  # CTE and SBST columns


def test_sweep_requires_seeds(tmp_path):
    from skytrust.config import ConfigError

    with pytest.raises(ConfigError):
        sweep(small(), seeds=[], out_dir=tmp_path)


# --- CLI --------------------------------------------------------------------------------


def test_cli_presets(capsys):
    assert cli_main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in ("desk-default", "paper-scale", "star-sparse", "mesh-dense"):
        assert name in out


def test_cli_run_and_verify_ledger(tmp_path, capsys):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(
        json.dumps(
            {
                "preset": "desk-default",
                "uav_count": 8,
                "rogue_fraction": 0.25,
                "rounds": 8,
            }
        )
    )
    out_dir = tmp_path / "results"
    code = cli_main(
        [
            "run",
            "--config",
            str(config_path),
            "--method",
            "dtsam",
            "--seed",
            "2",
            "--out",
            str(out_dir),
        ]
    )
    assert code == 0
    run_dirs = list(out_dir.iterdir())
    assert len(run_dirs) == 1
    ledger_path = run_dirs[0] / "ledger.ndjson"
    assert cli_main(["verify-ledger", str(ledger_path)]) == 0

    # tamper one payload byte: the check must fail with a nonzero exit
    lines = ledger_path.read_text().splitlines()
    corrupted = lines[3].replace('"payload":"', '"payload":"00', 1)
    ledger_path.write_text("\n".join(lines[:3] + [corrupted] + lines[4:]) + "\n")
    assert cli_main(["verify-ledger", str(ledger_path)]) == 1
    assert "Corrupt at height 3" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    out_dir = tmp_path / "sweep"
    config_path = tmp_path / "cfg.json"
    config_path.write_text(
        json.dumps(
            {"preset": "desk-default", "uav_count": 8, "rogue_fraction": 0.25, "rounds": 6}
        )
    )
    code = cli_main(
        [
            "sweep",
            "--config",
            str(config_path),
            "--seeds",
            "0,1",
            "--methods",
            "dtsam,sbst",
            "--out",
            str(out_dir),
        ]
    )
    assert code == 0
    assert (out_dir / "table.csv").exists()
    assert (out_dir / "sweep_summary.json").exists()


def test_cli_rejects_bad_config(tmp_path, capsys):
    config_path = tmp_path / "bad.json"
    config_path.write_text(json.dumps({"uav_countt": 3}))
    assert cli_main(["run", "--config", str(config_path)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_cli_rejects_missing_file(capsys):
    assert cli_main(["run", "--config", "/nonexistent/cfg.json"]) == 2
