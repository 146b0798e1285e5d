"""Command-line entry point: ``predclust {fit,export,synth,benchmark,evaluate}``.

Every subcommand accepts ``--config file.json``, a JSON object with one
section per module (``data``, ``greedy``, ``milp``, ``solve``, ``eval``,
``synth``, ``benchmark``). Command-line flags override the file. Unknown
sections or keys are rejected before any work starts.

Exit codes: 0 success, 2 invalid input or configuration, 3 the exact solver
stopped without any feasible solution.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .core import DataError, Dataset, LossKind, LossSpec, Regularization, Task, load_csv, write_csv
from .evaluation import BenchmarkSpec, EvalProtocol, benchmark_fig2, cross_validate, holdout_evaluate
from .greedy import ClusterType, FitReport, GreedyConfig, fit
from .metrics import accuracy, fitted_values, r2_score

log = logging.getLogger("predclust")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_INCUMBENT = 3

DEFAULTS = {
    "data": {"target": "y", "task": "regression", "standardize": True, "exclude": []},
    "greedy": {"restarts": 10, "max_iters": 100, "tol": 1e-6, "svm_tol": 1e-3, "svm_max_epochs": 200, "workers": 0},
    "loss": {"kind": None, "svm_c": 1.0, "reg_strength": 1.0},
    "milp": {"lam": 1.0, "theta_bound": 100.0, "epsilon": 1e-6, "strict_boxes": False, "exact_cap": 100},
    "solve": {"gap_threshold": 0.05, "time_limit": 3600.0, "node_limit": 10_000_000,
              "branch_rule": "most_fractional", "search": "best_bound"},
    "eval": {"train": 0.65, "val": 0.15, "test": 0.20, "k_folds": 5, "metric": None, "k_grid": [2, 3, 4, 5, 6, 7]},
    "synth": {f.name: f.default for f in fields(__import__("predclust.synth", fromlist=["SynthSpec"]).SynthSpec)},
    "benchmark": {f.name: f.default for f in fields(BenchmarkSpec)},
}
DEFAULTS["synth"]["task"] = "regression"
DEFAULTS["benchmark"]["task"] = "regression"


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS, default=_plain))
    if path is None:
        return cfg
    try:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object with one section per module")
    for section, values in user.items():
        if section not in cfg:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, val in values.items():
            if key not in cfg[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            cfg[section][key] = val
    return cfg


def _plain(obj):
    if hasattr(obj, "value"):
        return obj.value
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(type(obj))


def _override(cfg: dict, section: str, **values) -> None:
    for key, val in values.items():
        if val is not None:
            cfg[section][key] = val


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PREDCLUST_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PREDCLUST_SEED must be an integer, got {env!r}") from None
    return 0


def _workers(n: int) -> int:
    return n if n and n > 0 else (os.cpu_count() or 1)


def _loss_spec(cfg: dict, task: Task, method: str) -> LossSpec:
    kind = cfg["loss"]["kind"]
    if kind is None:
        if task is Task.CLASSIFICATION:
            kind = "hinge"
        else:
            kind = "mae" if method == "exact" else "mse"
    kind = LossKind(kind)
    if kind is LossKind.HINGE_WW:
        reg = Regularization.L1 if method == "exact" else Regularization.L2
        return LossSpec(kind, cfg["loss"]["svm_c"], reg, cfg["loss"]["reg_strength"])
    return LossSpec(kind)


def _data_overrides(cfg: dict, args) -> None:
    _override(cfg, "data", target=args.target, task=args.task)
    if args.no_standardize:
        cfg["data"]["standardize"] = False
    if args.exclude:
        cfg["data"]["exclude"] = [c.strip() for c in args.exclude.split(",") if c.strip()]


def _load_data(cfg: dict, path) -> Dataset:
    d = cfg["data"]
    return load_csv(path, d["target"], d["task"], d["standardize"], d["exclude"])


def _greedy_config(cfg: dict, k: int, geometry, seed: int) -> GreedyConfig:
    g = cfg["greedy"]
    return GreedyConfig(
        k=k, cluster_type=geometry, restarts=g["restarts"], max_iters=g["max_iters"], tol=g["tol"],
        seed=seed, svm_tol=g["svm_tol"], svm_max_epochs=g["svm_max_epochs"], workers=_workers(g["workers"]),
    )


def _milp_hyper(cfg: dict):
    from .milp import MilpHyper

    m = cfg["milp"]
    return MilpHyper(m["lam"], m["theta_bound"], m["epsilon"], m["strict_boxes"])


def _solve_config(cfg: dict):
    from .milp import SolveConfig

    return SolveConfig(**cfg["solve"])


def _float_list(a) -> list:
    return [float(v) for v in np.ravel(a)]


def cluster_summary(ds: Dataset, labels, params) -> list[dict]:
    """Per-cluster sizes, feature means (original units) and model weights."""
    out = []
    names = list(ds.column_names)
    x_orig = ds.scaler.inverse(ds.features) if ds.scaler is not None else ds.features
    for k in range(params.k):
        members = np.flatnonzero(np.asarray(labels) == k)
        entry = {
            "cluster": k,
            "size": int(members.size),
            "feature_means": (
                dict(zip(names, _float_list(x_orig[members].mean(axis=0)))) if members.size else {}
            ),
            "target_mean": float(ds.target[members].mean()) if members.size and ds.task is Task.REGRESSION else None,
        }
        w = params.weights[k]
        if ds.task is Task.REGRESSION:
            entry["weights"] = dict(zip(names + ["intercept"], _float_list(w)))
        else:
            labels_out = list(ds.label_map) or list(range(ds.n_classes))
            entry["weights"] = {
                str(labels_out[m]): dict(zip(names + ["intercept"], _float_list(w[m]))) for m in range(w.shape[0])
            }
        if params.centers is not None:
            entry["center"] = _float_list(params.centers[k])
        if params.boxes is not None:
            entry["box_min"] = _float_list(params.boxes[0][k])
            entry["box_max"] = _float_list(params.boxes[1][k])
        out.append(entry)
    return out


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, default=_plain) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_assignments(path, labels, per_datum) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id", "cluster", "loss"])
        for i, (k, l) in enumerate(zip(labels, per_datum)):
            w.writerow([i, int(k), repr(float(l))])


# -- subcommands --------------------------------------------------------------

def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    _data_overrides(cfg, args)
    _override(cfg, "loss", kind=args.loss)
    _override(cfg, "greedy", restarts=args.restarts)
    _override(cfg, "solve", time_limit=args.time_limit, gap_threshold=args.gap)
    _override(cfg, "milp", exact_cap=args.exact_cap, lam=args.lam)
    seed = _seed(args)
    ds = _load_data(cfg, args.data)
    spec = _loss_spec(cfg, ds.task, args.method)
    geometry = ClusterType(args.geometry)
    from .core import loss_matrix

    if args.method == "greedy":
        rep: FitReport = fit(ds, spec, _greedy_config(cfg, args.k, geometry, seed))
        labels, params = rep.assignment.labels, rep.params
        payload = {
            "method": "greedy",
            "status": "converged" if rep.converged else "max_iters",
            "loss": rep.loss,
            "loss_trace": rep.loss_trace,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "restart_index_of_best": rep.restart_index_of_best,
            "restart_losses": rep.restart_losses,
            "metrics": rep.metrics,
            "wall_time": rep.wall_time,
        }
    else:
        from .milp import build_milp, decode, solve_milp

        cap = cfg["milp"]["exact_cap"]
        if ds.n > cap:
            raise ConfigError(
                f"exact solving is limited to N <= {cap} rows (got {ds.n}); "
                "use --method greedy or raise --exact-cap"
            )
        model = build_milp(ds, spec, geometry, args.k, _milp_hyper(cfg))
        res = solve_milp(model, _solve_config(cfg))
        if not res.has_incumbent:
            _write_json(args.out, {"method": "exact", "status": res.status.value, "nodes": res.nodes,
                                   "wall_time": res.wall_time})
            print(f"exact solver stopped ({res.status.value}) without a feasible solution", file=sys.stderr)
            return EXIT_NO_INCUMBENT
        asg, params = decode(model, res.incumbent, ds)
        labels = asg.labels
        pred = fitted_values(ds, labels, params)
        metric = {"train_r2": r2_score(ds.target, pred)} if ds.task is Task.REGRESSION else {
            "train_accuracy": accuracy(ds.target, pred)}
        payload = {
            "method": "exact",
            "status": res.status.value,
            "objective": res.objective,
            "best_bound": res.best_bound,
            "gap": res.gap,
            "nodes": res.nodes,
            "big_m": model.metadata["big_m"],
            "metrics": metric,
            "wall_time": res.wall_time,
        }
    per_datum = loss_matrix(ds, params, spec)[np.arange(ds.n), labels]
    payload = {
        "config": {"data": cfg["data"], "k": args.k, "geometry": geometry.value, "loss": asdict(spec),
                   "seed": seed, "greedy": cfg["greedy"], "milp": cfg["milp"], "solve": cfg["solve"]},
        **payload,
        "clusters": cluster_summary(ds, labels, params),
    }
    _write_json(args.out, payload)
    if args.assignments:
        _write_assignments(args.assignments, labels, per_datum)
    return EXIT_OK


def cmd_export(args) -> int:
    from .milp import build_milp, export_mps

    cfg = load_config(args.config)
    _data_overrides(cfg, args)
    _override(cfg, "loss", kind=args.loss)
    _override(cfg, "milp", lam=args.lam)
    ds = _load_data(cfg, args.data)
    spec = _loss_spec(cfg, ds.task, "exact")
    model = build_milp(ds, spec, args.geometry, args.k, _milp_hyper(cfg))
    export_mps(model, args.mps)
    if args.lp:
        Path(args.lp).write_text(model.to_lp_string(), encoding="utf-8")
    print(f"wrote {model.n_vars} columns, {len(model.constraints)} rows to {args.mps}", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SynthSpec, gen_classification, gen_regression

    cfg = load_config(args.config)
    _override(cfg, "synth", task=args.task, k_true=args.k_true, n=args.n, d=args.d, separation=args.separation,
              noise_sigma=args.noise, label_flip_prob=args.flip)
    cfg["synth"]["seed"] = _seed(args) if args.seed is not None or "PREDCLUST_SEED" in os.environ else cfg["synth"]["seed"]
    spec = SynthSpec(**cfg["synth"])
    gen = gen_regression if spec.task is Task.REGRESSION else gen_classification
    ds, labels, _ = gen(spec)
    write_csv(args.out, ds, target_name="y", extra={"true_cluster": [int(v) for v in labels]})
    return EXIT_OK


def _parse_grid(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_benchmark(args) -> int:
    cfg = load_config(args.config)
    _override(cfg, "benchmark", task=args.task, milp_cap=args.milp_cap, milp_time_limit=args.milp_time_limit,
              k=args.k, restarts=args.restarts)
    if args.grid:
        cfg["benchmark"]["n_grid"] = _parse_grid(args.grid)
    if args.geometries:
        cfg["benchmark"]["geometries"] = [g.strip() for g in args.geometries.split(",")]
    cfg["benchmark"]["seed"] = _seed(args) if args.seed is not None or "PREDCLUST_SEED" in os.environ else cfg["benchmark"]["seed"]
    bench = BenchmarkSpec(**cfg["benchmark"])
    text = benchmark_fig2(bench, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    _data_overrides(cfg, args)
    _override(cfg, "loss", kind=args.loss)
    _override(cfg, "greedy", restarts=args.restarts)
    if args.k_grid:
        cfg["eval"]["k_grid"] = _parse_grid(args.k_grid)
    seed = _seed(args)
    ds = _load_data(cfg, args.data)
    spec = _loss_spec(cfg, ds.task, "greedy")
    e = cfg["eval"]
    metric = e["metric"] or ("r2" if ds.task is Task.REGRESSION else "accuracy")
    protocol = EvalProtocol(e["train"], e["val"], e["test"], e["k_folds"], metric, e["k_grid"], seed)
    gcfg = _greedy_config(cfg, protocol.k_grid[0], ClusterType(args.geometry), seed)
    if args.protocol == "holdout":
        report = holdout_evaluate(ds, protocol, spec, gcfg)
    else:
        if args.protocol.startswith("cv"):
            protocol.k_folds = int(args.protocol[2:] or 5)
        report = cross_validate(ds, protocol, spec, gcfg)
        per_k: dict[str, list[float]] = {}
        for f in report["per_fold"]:
            for k, v in f["val_scores"].items():
                per_k.setdefault(k, []).append(v)
        report["mean_val_scores"] = {k: float(np.mean(v)) for k, v in per_k.items()}
    _write_json(args.out, report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="predclust", description="Predictive clustering: fit, export, evaluate.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp):
        sp.add_argument("data", help="input CSV with a header row")
        sp.add_argument("--target", help="target column name (default: y)")
        sp.add_argument("--task", choices=[t.value for t in Task])
        sp.add_argument("--no-standardize", action="store_true", help="keep features in original units")
        sp.add_argument("--exclude", help="comma list of columns to ignore, e.g. true_cluster")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="seed (falls back to $PREDCLUST_SEED, then 0)")

    f = sub.add_parser("fit", help="fit a predictive clustering model")
    data_flags(f)
    f.add_argument("--loss", choices=[k.value for k in LossKind])
    f.add_argument("--geometry", choices=[c.value for c in ClusterType], default="cc")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--method", choices=["greedy", "exact"], default="greedy")
    f.add_argument("--restarts", type=int)
    f.add_argument("--time-limit", type=float, dest="time_limit")
    f.add_argument("--gap", type=float)
    f.add_argument("--lam", type=float, help="distance weight for exact closest-center models")
    f.add_argument("--exact-cap", type=int, dest="exact_cap", help="largest N accepted by --method exact")
    f.add_argument("--out", help="report JSON path (default: stdout)")
    f.add_argument("--assignments", help="per-row assignment CSV path")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("export", help="write the exact model as free MPS")
    data_flags(e)
    e.add_argument("--loss", choices=[LossKind.MAE.value, LossKind.HINGE_WW.value])
    e.add_argument("--geometry", choices=[c.value for c in ClusterType], default="cc")
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--lam", type=float)
    e.add_argument("--mps", required=True)
    e.add_argument("--lp", help="also write a readable LP-style dump")
    e.set_defaults(func=cmd_export)

    s = sub.add_parser("synth", help="generate synthetic clustered data")
    s.add_argument("--task", choices=[t.value for t in Task])
    s.add_argument("--k-true", type=int, dest="k_true")
    s.add_argument("--n", type=int)
    s.add_argument("--d", type=int)
    s.add_argument("--separation", type=float)
    s.add_argument("--noise", type=float)
    s.add_argument("--flip", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("benchmark", help="greedy vs exact comparison over N")
    b.add_argument("--grid", help="comma list or lo..hi of N values")
    b.add_argument("--geometries", help="comma list of arbitrary,cc,bb")
    b.add_argument("--task", choices=[t.value for t in Task])
    b.add_argument("--k", type=int)
    b.add_argument("--restarts", type=int)
    b.add_argument("--milp-cap", type=int, dest="milp_cap")
    b.add_argument("--milp-time-limit", type=float, dest="milp_time_limit")
    b.add_argument("--seed", type=int)
    b.add_argument("--config")
    b.add_argument("--out")
    b.set_defaults(func=cmd_benchmark)

    v = sub.add_parser("evaluate", help="cross-validated evaluation with K selection")
    data_flags(v)
    v.add_argument("--loss", choices=[LossKind.MSE.value, LossKind.HINGE_WW.value])
    v.add_argument("--geometry", choices=[c.value for c in ClusterType], default="cc")
    v.add_argument("--protocol", default="cv5", help="cvN (N folds) or holdout")
    v.add_argument("--k-grid", dest="k_grid", help="e.g. 2..7 or 2,4,6")
    v.add_argument("--restarts", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
