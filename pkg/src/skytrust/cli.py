"""Command-line entry point.

    skytrust run --config cfg.json --method dtsam --seed 3 --out results/
    skytrust sweep --preset desk-default --seeds 0,1,2 --methods dtsam,cte,sbst --out results/
    skytrust verify-ledger results/<run-id>/ledger.ndjson
    skytrust presets
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import harness, ledger
from .config import ConfigError, load_config, preset, preset_names


def _base_config(args):
    if args.config:
        config = load_config(args.config)
    elif args.preset:
        config = preset(args.preset)
    else:
        config = preset("desk-default")
    return config


def _cmd_run(args) -> int:
    config = _base_config(args)
    overrides = {}
    if args.method:
        overrides["method"] = args.method
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trace:
        overrides["export_trace"] = True
    if overrides:
        config = dataclasses.replace(config, **overrides)
    report = harness.run_experiment(config, config.seed, args.out)
    rid = harness.run_id(config, config.seed)
    print(f"run {rid}: method={config.method} seed={config.seed}")
    for key, value in report.scalars().items():
        print(f"  {key} = {value}")
    if args.out:
        print(f"results in {args.out}/{rid}/")
    return 0


def _cmd_sweep(args) -> int:
    config = _base_config(args)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    results = harness.sweep(config, seeds, methods, args.out)
    for method, reports in results.items():
        agg = harness.aggregate(reports)
        det = agg["detection_rate"]
        acc = agg["accuracy"]
        print(
            f"{method}: accuracy {acc[0]:.4f} +- {acc[1]:.4f}, "
            f"detection {det[0]:.4f} +- {det[1]:.4f} over {len(reports)} seeds"
        )
    if args.out:
        print(f"table in {args.out}/table.csv")
    return 0


def _cmd_verify_ledger(args) -> int:
    with open(args.ledger, "r", encoding="utf-8") as fh:
        chain = ledger.from_ndjson(fh.read())
    status = ledger.verify_chain(chain)
    if status.valid:
        print(f"Valid: {len(chain)} blocks, {chain.transaction_count()} transactions")
        return 0
    print(f"Corrupt at height {status.corrupt_height}", file=sys.stderr)
    return 1


def _cmd_presets(_args) -> int:
    for name in preset_names():
        cfg = preset(name)
        print(
            f"{name}: {cfg.uav_count} UAVs ({cfg.rogue_count} rogue), "
            f"{cfg.user_count} users, {cfg.area_side_km} km side, "
            f"{cfg.topology}, {cfg.rounds} rounds"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skytrust",
        description="Trust, consensus, and federated-learning simulator for UAV networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one method on one seed")
    run_p.add_argument("--config", help="scenario JSON file")
    run_p.add_argument("--preset", help="named scenario preset")
    run_p.add_argument("--method", choices=("dtsam", "cte", "sbst"))
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", help="results directory")
    run_p.add_argument("--trace", action="store_true", help="export per-round world trace")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a seed/method grid and emit the comparison table")
    sweep_p.add_argument("--config", help="scenario JSON file")
    sweep_p.add_argument("--preset", help="named scenario preset")
    sweep_p.add_argument("--seeds", required=True, help="comma separated seed list")
    sweep_p.add_argument("--methods", default="dtsam,cte,sbst")
    sweep_p.add_argument("--out", help="results directory")
    sweep_p.set_defaults(func=_cmd_sweep)

    verify_p = sub.add_parser("verify-ledger", help="check an exported ledger's hash chain")
    verify_p.add_argument("ledger", help="path to ledger.ndjson")
    verify_p.set_defaults(func=_cmd_verify_ledger)

    presets_p = sub.add_parser("presets", help="list named scenarios")
    presets_p.set_defaults(func=_cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ledger.LedgerFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
