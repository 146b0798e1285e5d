"""Data splitting, cross-validation, K selection and the greedy-vs-exact benchmark."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, LossKind, LossSpec, Scaler, Task
from .greedy import ClusterType, GreedyConfig, fit
from .metrics import METRICS, fitted_values, predict

log = logging.getLogger(__name__)

BENCH_HEADER = ["N", "method", "geometry", "loss", "metric_name", "metric_value", "seconds"]


@dataclass
class EvalProtocol:
    train: float = 0.65
    val: float = 0.15
    test: float = 0.20
    k_folds: int = 5
    metric: str = "r2"
    k_grid: Sequence[int] = (2, 3, 4, 5, 6, 7)
    seed: int = 0

    def __post_init__(self):
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if min(self.train, self.val, self.test) < 0:
            raise ValueError("split fractions must be nonnegative")
        if self.k_folds < 2:
            raise ValueError("need at least two folds")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        self.k_grid = tuple(int(k) for k in self.k_grid)
        if not self.k_grid:
            raise ValueError("k_grid must not be empty")


def split_indices(n: int, fractions=(0.65, 0.15, 0.20), seed: int = 0) -> list[np.ndarray]:
    """Shuffle ``0..n-1`` and cut it into consecutive parts of the given sizes."""
    perm = np.random.default_rng(seed).permutation(n)
    cuts = np.round(np.cumsum(fractions)[:-1] * n).astype(int)
    return [np.sort(p) for p in np.split(perm, cuts)]


def kfold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def score(metric: str, y_true, y_pred) -> float:
    return METRICS[metric](y_true, y_pred)


def higher_is_better(metric: str) -> bool:
    return metric != "rmse"


def select_k(val_scores: dict[int, float], metric: str) -> int:
    """Best validation score; ties go to the smaller K."""
    sign = 1.0 if higher_is_better(metric) else -1.0
    return min(val_scores, key=lambda k: (-sign * val_scores[k], k))


def _fit_and_score(train: Dataset, test: Dataset, spec: LossSpec, cfg: GreedyConfig, metric: str):
    rep = fit(train, spec, cfg)
    pred = predict(test.features, rep.params, cfg.cluster_type)
    return rep, score(metric, test.target, pred)


def cross_validate(ds: Dataset, protocol: EvalProtocol, spec: LossSpec, cfg: GreedyConfig) -> dict:
    """K-fold out-of-sample evaluation with per-fold K selection.

    In every fold the non-test rows are split train:validation in the
    protocol's train:val ratio, each candidate K is fitted on the train part
    and scored on validation, and the chosen K is refitted on all non-test
    rows before scoring the held-out fold. A single-entry grid skips the
    validation step.
    """
    start = time.perf_counter()
    folds = kfold_indices(ds.n, protocol.k_folds, protocol.seed)
    per_fold = []
    for f, test_idx in enumerate(folds):
        rest = np.setdiff1d(np.arange(ds.n), test_idx)
        val_scores: dict[int, float] = {}
        if len(protocol.k_grid) > 1:
            share = protocol.val / (protocol.train + protocol.val)
            rng = np.random.default_rng(protocol.seed + 1000 + f)
            shuffled = rng.permutation(rest)
            n_val = int(round(share * rest.size))
            val_idx, tr_idx = np.sort(shuffled[:n_val]), np.sort(shuffled[n_val:])
            for k in protocol.k_grid:
                if k > tr_idx.size:
                    continue
                _, s = _fit_and_score(ds.subset(tr_idx), ds.subset(val_idx), spec, replace(cfg, k=k), protocol.metric)
                val_scores[k] = s
            chosen = select_k(val_scores, protocol.metric)
        else:
            chosen = protocol.k_grid[0]
        rep, test_score = _fit_and_score(
            ds.subset(rest), ds.subset(test_idx), spec, replace(cfg, k=chosen), protocol.metric
        )
        per_fold.append(
            {
                "fold": f,
                "n_train": int(rest.size),
                "n_test": int(test_idx.size),
                "k": chosen,
                "val_scores": {str(k): v for k, v in val_scores.items()},
                "train_loss": rep.loss,
                protocol.metric: test_score,
            }
        )
        log.info("fold %d: K=%d %s=%.4f", f, chosen, protocol.metric, test_score)
    values = np.array([p[protocol.metric] for p in per_fold])
    return {
        "config": {
            "protocol": asdict(protocol) | {"k_grid": list(protocol.k_grid)},
            "greedy": _jsonable(asdict(cfg)),
            "loss": _jsonable(asdict(spec)),
        },
        "per_fold": per_fold,
        "mean": float(values.mean()),
        "std": float(values.std()),
        "wall_time": time.perf_counter() - start,
    }


def holdout_evaluate(ds: Dataset, protocol: EvalProtocol, spec: LossSpec, cfg: GreedyConfig) -> dict:
    """Single 65/15/20 style split: choose K on validation, report test score."""
    start = time.perf_counter()
    tr, va, te = split_indices(ds.n, (protocol.train, protocol.val, protocol.test), protocol.seed)
    val_scores = {}
    for k in protocol.k_grid:
        if k <= tr.size:
            _, val_scores[k] = _fit_and_score(ds.subset(tr), ds.subset(va), spec, replace(cfg, k=k), protocol.metric)
    chosen = select_k(val_scores, protocol.metric)
    _, test_score = _fit_and_score(
        ds.subset(np.concatenate([tr, va])), ds.subset(te), spec, replace(cfg, k=chosen), protocol.metric
    )
    return {
        "config": {"protocol": asdict(protocol) | {"k_grid": list(protocol.k_grid)}},
        "val_scores": {str(k): v for k, v in val_scores.items()},
        "k": chosen,
        "test": test_score,
        "wall_time": time.perf_counter() - start,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value"):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class BenchmarkSpec:
    """Grid for the greedy-vs-exact comparison on synthetic data."""

    n_grid: Sequence[int] = (20, 50, 100, 250, 1000, 10_000)
    geometries: Sequence[str] = ("arbitrary", "cc", "bb")
    task: Task = Task.REGRESSION
    k: int = 2
    milp_cap: int = 50
    milp_time_limit: float = 60.0
    milp_gap: float = 0.05
    restarts: int = 10
    seed: int = 0
    standardize: bool = True
    separation: float = 8.0
    noise_sigma: float = 0.5
    label_flip_prob: float = 0.1


def _in_sample_metric(ds: Dataset, labels, params) -> tuple[str, float]:
    pred = fitted_values(ds, labels, params)
    if ds.task is Task.REGRESSION:
        return "r2", score("r2", ds.target, pred)
    return "accuracy", score("accuracy", ds.target, pred)


def standardized(ds: Dataset) -> Dataset:
    sc = Scaler.fit(ds.features)
    return Dataset(
        sc.transform(ds.features), ds.target, ds.task,
        ds.n_classes if ds.task is Task.CLASSIFICATION else 0,
        ds.column_names, ds.label_map, sc,
    )


def benchmark_rows(bench: BenchmarkSpec) -> list[dict]:
    """Run greedy at every N and the exact solver where N <= milp_cap."""
    from .milp import MilpHyper, SolveConfig, build_milp, decode, solve_milp
    from .synth import SynthSpec, gen_classification, gen_regression

    rows = []
    task = Task(bench.task)
    for n in bench.n_grid:
        synth = SynthSpec(
            task=task, k_true=bench.k, n=n, separation=bench.separation,
            noise_sigma=bench.noise_sigma, label_flip_prob=bench.label_flip_prob, seed=bench.seed,
        )
        gen = gen_regression if task is Task.REGRESSION else gen_classification
        ds = gen(synth)[0]
        if bench.standardize:
            ds = standardized(ds)
        greedy_loss = LossSpec(LossKind.MSE) if task is Task.REGRESSION else LossSpec.hinge_l2()
        exact_loss = LossSpec(LossKind.MAE) if task is Task.REGRESSION else LossSpec.hinge_l1()
        for geo in bench.geometries:
            geo = ClusterType(geo)
            if task is Task.CLASSIFICATION and geo is ClusterType.ARBITRARY:
                continue
            t0 = time.perf_counter()
            rep = fit(ds, greedy_loss, GreedyConfig(k=bench.k, cluster_type=geo, restarts=bench.restarts, seed=bench.seed))
            name, value = _in_sample_metric(ds, rep.assignment.labels, rep.params)
            rows.append(_bench_row(n, "greedy", geo, greedy_loss, name, value, time.perf_counter() - t0))
            if n <= bench.milp_cap:
                t0 = time.perf_counter()
                model = build_milp(ds, exact_loss, geo, bench.k, MilpHyper())
                res = solve_milp(model, SolveConfig(gap_threshold=bench.milp_gap, time_limit=bench.milp_time_limit))
                if res.has_incumbent:
                    asg, params = decode(model, res.incumbent, ds)
                    name, value = _in_sample_metric(ds, asg.labels, params)
                else:
                    value = float("nan")
                rows.append(_bench_row(n, "milp", geo, exact_loss, name, value, time.perf_counter() - t0))
    return rows


def _bench_row(n, method, geo, loss, metric_name, value, seconds) -> dict:
    return {
        "N": n,
        "method": method,
        "geometry": ClusterType(geo).value,
        "loss": loss.kind.value,
        "metric_name": metric_name,
        "metric_value": value,
        "seconds": seconds,
    }


def benchmark_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "metric_value": repr(float(r["metric_value"])), "seconds": f"{r['seconds']:.6f}"})
    return buf.getvalue()


def benchmark_fig2(bench: BenchmarkSpec, out: Optional[str] = None) -> str:
    """Greedy vs exact timing/quality table as plot-ready CSV text."""
    text = benchmark_csv(benchmark_rows(bench))
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
