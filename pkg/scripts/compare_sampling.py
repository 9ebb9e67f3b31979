#!/usr/bin/env python3
"""Uniform vs adaptive sampling on one synthetic task, shared seeds.

Writes comparison.json (and per-arm metrics) under --out and prints the
median iterations-to-target per arm.
"""

import argparse

from adasamp.harness import ExperimentConfig, dumps_json, run_comparison


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--iters", type=int, default=4000)
    ap.add_argument("--batch", type=int, default=100)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()

    cfg = ExperimentConfig(n=args.n, iters=args.iters, batch=args.batch,
                           trials=args.trials, alpha=args.alpha, seed=args.seed,
                           out=args.out)
    result = run_comparison(cfg)
    for arm, stats in result["comparison"]["arms"].items():
        print(f"{arm}: median iterations to target = {stats['median_iterations_to_target']}")
    print(dumps_json(result["comparison"]))


if __name__ == "__main__":
    main()
