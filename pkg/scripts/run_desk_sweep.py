#!/usr/bin/env python3
"""Reproduce the desk-scale comparison: 10 seeds, all three methods.

Writes per-run results plus table.csv under results/desk-sweep/. Takes
about half a minute.
"""

import sys
from pathlib import Path

from skytrust.config import preset
from skytrust.harness import aggregate, sweep

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/desk-sweep")


def main():
    cfg = preset("desk-default")
    results = sweep(cfg, seeds=range(10), methods=("dtsam", "cte", "sbst"), out_dir=OUT)
    print(f"wrote {OUT}/table.csv")
    for method, reports in results.items():
        agg = aggregate(reports)
        print(
            f"{method:>6}: accuracy {agg['accuracy'][0]:.3f}"
            f"  detection {agg['detection_rate'][0]:.3f}"
            f"  MB/UAV {agg['comm_overhead_mb_per_uav'][0]:.3f}"
            f"  J/tx {agg['energy_per_transaction_joules'][0]:.3f}"
        )


if __name__ == "__main__":
    main()
