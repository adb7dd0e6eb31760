#!/usr/bin/env python3
"""Run the default single-target grid ({corner, random} x {4, 6, 8} solid
triggers, all seven methods) and print the report table.

Usage: python scripts/run_default_grid.py [OUT_DIR] [--samples N] [--seed S]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from txai_bench.config import default_grid_mapping, experiment_from_mapping, format_config
from txai_bench.runner import run_experiment


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="runs/default_grid")
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args()

    mapping = default_grid_mapping(eval_samples=args.samples, seed=args.seed, out_dir=args.out)
    cfg = experiment_from_mapping(mapping)
    result = run_experiment(cfg, format_config(mapping), force=args.force)

    print(f"\n{'scenario':10} {'method':7} {'iou':>7} {'rr':>7} {'rd':>7} {'cc(s)':>8} {'mr':>6} {'ca':>6}")
    for r in result.records:
        print(f"{r.scenario_id:10} {r.method:7} {r.iou_mean:7.3f} {r.rr:7.3f} "
              f"{r.rd:7.3f} {r.cc_mean:8.4f} {r.mr:6.3f} {r.ca:6.3f}")
    print(f"\nfull reports in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
