#!/usr/bin/env python3
"""Trust-weighted vs plain size-weighted aggregation under update poisoning.

Same scenario, same seeds; only the aggregation rule changes.
"""

import dataclasses

import numpy as np

from skytrust.config import preset
from skytrust.harness import run_experiment

SEEDS = range(10)


def main():
    base = preset("desk-default")
    for aggregation in ("trust_weighted", "fedavg"):
        cfg = dataclasses.replace(
            base, fl=dataclasses.replace(base.fl, aggregation=aggregation)
        )
        dets = [run_experiment(cfg, seed=s).detection_rate for s in SEEDS]
        print(
            f"{aggregation:>14}: mean detection {np.mean(dets):.3f}"
            f"  per-seed {np.round(dets, 2).tolist()}"
        )


if __name__ == "__main__":
    main()
