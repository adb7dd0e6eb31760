#!/usr/bin/env python3
"""Multi-target experiment: several distinct triggers (texture, color,
shape), each bound to its own target label, in one backdoored model.

Usage: python scripts/run_multi_target.py [OUT_DIR] [--k K] [--location corner|random]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from txai_bench.config import experiment_from_mapping, format_config, multi_target_mapping
from txai_bench.runner import run_experiment


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="runs/multi_target")
    ap.add_argument("--k", type=int, default=4, help="number of trigger/target pairs")
    ap.add_argument("--location", default="corner", choices=["corner", "random"])
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args()

    mapping = multi_target_mapping(
        k=args.k, location=args.location, eval_samples=args.samples,
        seed=args.seed, out_dir=args.out,
    )
    cfg = experiment_from_mapping(mapping)
    result = run_experiment(cfg, format_config(mapping), force=args.force)
    info = result.scenario_info["multi"]
    print(f"\nmulti-target model: mr {info['mr']:.3f} ca {info['ca']:.3f}")
    print(f"{'method':7} {'iou':>7} {'rr':>7} {'rd':>7} {'cc(s)':>8}")
    for r in result.records:
        print(f"{r.method:7} {r.iou_mean:7.3f} {r.rr:7.3f} {r.rd:7.3f} {r.cc_mean:8.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
