"""Greedy vs exact over a grid of N; writes plot-ready CSV.

    python scripts/run_benchmark.py --grid 20,50,100,1000 --milp-time-limit 60 --out bench.csv
"""

import argparse
import sys

from predclust.evaluation import BenchmarkSpec, benchmark_fig2


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", default="20,50,100,250,1000,10000")
    ap.add_argument("--task", default="regression", choices=["regression", "classification"])
    ap.add_argument("--milp-cap", type=int, default=50)
    ap.add_argument("--milp-time-limit", type=float, default=60.0)
    ap.add_argument("--restarts", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    bench = BenchmarkSpec(
        n_grid=[int(v) for v in args.grid.split(",")],
        task=args.task,
        milp_cap=args.milp_cap,
        milp_time_limit=args.milp_time_limit,
        restarts=args.restarts,
        seed=args.seed,
    )
    text = benchmark_fig2(bench, args.out)
    if args.out is None:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
