#!/usr/bin/env python3
"""Semi-supervised comparison on the built-in toy flight domain.

Pre-trains supervised Q2LF/LF2Q baselines on a labeled fraction of the
training set, runs the dual-learning game with the remaining unpaired
queries and logical forms, and prints baseline vs. dual test accuracy.
"""

import argparse

from dualsp.experiment import run_semi_supervised_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--labeled-ratio", type=float, default=0.5)
    ap.add_argument("--d-w", type=int, default=32)
    ap.add_argument("--n-hidden", type=int, default=64)
    ap.add_argument("--validity-mode", choices=("grammar", "lflm"), default="grammar")
    ap.add_argument("--dual-iters", type=int, default=200)
    ap.add_argument("--no-queries", action="store_true", help="drop unpaired queries")
    ap.add_argument("--no-lfs", action="store_true", help="drop unpaired logical forms")
    args = ap.parse_args()

    res = run_semi_supervised_experiment(
        seed=args.seed,
        labeled_ratio=args.labeled_ratio,
        d_w=args.d_w,
        n_hidden=args.n_hidden,
        use_queries=not args.no_queries,
        use_lfs=not args.no_lfs,
        validity_mode=args.validity_mode,
        dual_iters=args.dual_iters,
    )
    print("iteration\tmean_reward_q\tmean_reward_lf\tvalidity_rate\tvalid_accuracy")
    for row in res.log_rows:
        print(row.format())
    print(f"baseline  valid {res.baseline_valid_acc:.4f}  test {res.baseline_test_acc:.4f}")
    print(f"dual      valid {res.dual_valid_acc:.4f}  test {res.dual_test_acc:.4f}")


if __name__ == "__main__":
    main()
