#!/usr/bin/env python3
"""Run the 50-UAV / 100-user configuration and report the overhead ratio."""

import sys
from pathlib import Path

from skytrust.config import preset
from skytrust.harness import sweep

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("results/paper-scale")


def main():
    cfg = preset("paper-scale")
    results = sweep(cfg, seeds=[0, 1, 2], methods=("dtsam", "cte", "sbst"), out_dir=OUT)
    dtsam_mb = sum(r.comm_overhead_mb_per_uav for r in results["dtsam"]) / 3
    cte_mb = sum(r.comm_overhead_mb_per_uav for r in results["cte"]) / 3
    print(f"wrote {OUT}/table.csv")
    print(f"per-UAV overhead: centralized {cte_mb:.2f} MB vs proposed {dtsam_mb:.3f} MB")
    print(f"ratio: {cte_mb / dtsam_mb:.1f}x")


if __name__ == "__main__":
    main()
