#!/usr/bin/env python3
"""Time every saliency method on one backdoored model and print mean
wall-clock seconds per map, forward vs backward methods side by side.

Usage: python scripts/compare_method_costs.py [--images N]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from txai_bench.arch import build_architecture
from txai_bench.data import SyntheticSpec, generate_synthetic
from txai_bench.metrics import computation_cost
from txai_bench.nn import TrainConfig, predict_batch
from txai_bench.saliency import BACKWARD_METHODS, FORWARD_METHODS, MethodConfig, explain
from txai_bench.trojan import PoisonConfig, PoisonEntry, TriggerSpec, stamp_all, trojan_train


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--images", type=int, default=20)
    args = ap.parse_args()

    train_set, test_set = generate_synthetic(SyntheticSpec(train_count=1500))
    net0 = build_architecture("cnn_small", (1, 28, 28), 3, seed=0)
    bundle = trojan_train(
        net0, train_set.images, train_set.labels,
        PoisonConfig(entries=(PoisonEntry(TriggerSpec(size=6), 1),), fraction=0.1, seed=0),
        TrainConfig(learning_rate=0.02, epochs=8, batch_size=32, seed=0, momentum=0.9),
    )
    keep = test_set.labels != 1
    stamped, _ = stamp_all(test_set.images[keep][: args.images], TriggerSpec(size=6),
                           (1, 28, 28), np.random.default_rng(0))
    flipped = stamped[predict_batch(bundle.trojaned, stamped) == 1]
    print(f"timing {len(flipped)} stamped images per method\n")
    cfg = MethodConfig()
    print(f"{'method':7} {'kind':9} {'mean s/map':>11}")
    for method in BACKWARD_METHODS + FORWARD_METHODS:
        times = [explain(bundle.trojaned, img, 1, method, cfg).wall_clock_seconds
                 for img in flipped]
        kind = "backward" if method in BACKWARD_METHODS else "forward"
        print(f"{method:7} {kind:9} {computation_cost(times):11.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
