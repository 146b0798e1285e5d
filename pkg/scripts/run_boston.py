"""Boston housing: 5-fold CV of closest-center clusterwise regression and a K=6 cluster table.

    python scripts/run_boston.py [--restarts 10] [--out boston_report.json]
"""

import argparse
import json
from pathlib import Path

from predclust.cli import cluster_summary
from predclust.core import LossKind, LossSpec, load_csv
from predclust.evaluation import EvalProtocol, cross_validate
from predclust.greedy import GreedyConfig, fit

DATA = Path(__file__).resolve().parents[1] / "tests" / "data" / "boston.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=6)
    ap.add_argument("--restarts", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--select-k", action="store_true", help="choose K in 2..7 per fold on validation")
    ap.add_argument("--out")
    args = ap.parse_args()

    ds = load_csv(DATA, "MEDV")
    spec = LossSpec(LossKind.MSE)
    grid = tuple(range(2, 8)) if args.select_k else (args.k,)
    cfg = GreedyConfig(k=args.k, cluster_type="cc", restarts=args.restarts, seed=args.seed)
    cv = cross_validate(ds, EvalProtocol(k_grid=grid, seed=args.seed), spec, cfg)
    for f in cv["per_fold"]:
        print(f"fold {f['fold']}: K={f['k']} R2={f['r2']:.4f}")
    print(f"mean R2 {cv['mean']:.4f} (std {cv['std']:.4f})")

    rep = fit(ds, spec, cfg)
    table = cluster_summary(ds, rep.assignment.labels, rep.params)
    cols = ["CRIM", "RM", "LSTAT", "PTRATIO"]
    print("\ncluster  size  " + "  ".join(f"{c:>8}" for c in cols) + "   (means | weights on standardized features)")
    for row in table:
        means = "  ".join(f"{row['feature_means'][c]:8.2f}" for c in cols)
        weights = "  ".join(f"{row['weights'][c]:8.2f}" for c in cols)
        print(f"{row['cluster']:>7}  {row['size']:>4}  {means} | {weights}")
    if args.out:
        Path(args.out).write_text(json.dumps({"cv": cv, "clusters": table}, indent=2, default=str))


if __name__ == "__main__":
    main()
