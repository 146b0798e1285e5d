"""Alternating (majorize-minimize style) predictive clustering.

Each restart starts from a random partition and alternates two steps until
the objective stops changing: refit every cluster's model on its members,
then reassign points from the refitted models and the cluster geometry.
"""

from __future__ import annotations

import enum
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linsvm
from .core import (
    Assignment,
    ClusterParams,
    Dataset,
    LossKind,
    LossSpec,
    Regularization,
    Task,
    loss_matrix,
    total_loss,
)
from .metrics import accuracy, fitted_values, r2_score

log = logging.getLogger(__name__)

RIDGE = 1e-8
BOX_EPS = 1e-9


class ClusterType(str, enum.Enum):
    ARBITRARY = "arbitrary"
    CLOSEST_CENTER = "cc"
    BOUNDING_BOX = "bb"


@dataclass
class GreedyConfig:
    k: int
    cluster_type: ClusterType = ClusterType.CLOSEST_CENTER
    restarts: int = 10
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0
    svm_tol: float = 1e-3
    svm_max_epochs: int = 200
    workers: int = 1
    strict_loss: bool = False

    def __post_init__(self):
        self.cluster_type = ClusterType(self.cluster_type)
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class FitReport:
    assignment: Assignment
    params: ClusterParams
    loss_trace: list[float]
    iterations: int
    converged: bool
    wall_time: float
    restart_index_of_best: int
    metrics: dict[str, float] = field(default_factory=dict)
    restart_losses: list[float] = field(default_factory=list)

    @property
    def loss(self) -> float:
        return self.loss_trace[-1]


def _regression_fit(xa: np.ndarray, y: np.ndarray) -> np.ndarray:
    gram = xa.T @ xa
    rhs = xa.T @ y
    if xa.shape[0] >= xa.shape[1] and np.linalg.cond(gram) < 1e12:
        return np.linalg.solve(gram, rhs)
    return np.linalg.solve(gram + RIDGE * np.eye(gram.shape[0]), rhs)


class _SvmState:
    """Dual variables kept between iterations to warm-start the inner solver."""

    def __init__(self, n: int, m: int):
        self.alpha = np.zeros((n, m))
        self.labels: Optional[np.ndarray] = None

    def sync(self, labels: np.ndarray):
        if self.labels is not None:
            self.alpha[labels != self.labels] = 0.0
        self.labels = labels.copy()


def optimize_per_cluster(
    ds: Dataset,
    asg: Assignment,
    spec: LossSpec,
    cfg: Optional[GreedyConfig] = None,
    svm_state: Optional[_SvmState] = None,
) -> ClusterParams:
    """Fit each cluster's model on its members with the assignment held fixed.

    Squared error is minimized exactly (normal equations, tiny ridge when the
    design is rank deficient). Hinge loss trains a one-vs-rest L2 SVM.
    """
    sizes = asg.sizes
    if np.any(sizes == 0):
        raise ValueError(f"cluster {int(np.argmin(sizes))} is empty")
    xa = ds.design
    if spec.kind is LossKind.HINGE_WW:
        cfg = cfg or GreedyConfig(k=asg.k)
        if svm_state is None:
            svm_state = _SvmState(ds.n, ds.n_classes)
        svm_state.sync(asg.labels)
        strength = spec.reg_strength if spec.regularization is Regularization.L2 else 0.0
        strength = strength or 1.0
        w = np.zeros((asg.k, ds.n_classes, xa.shape[1]))
        for k in range(asg.k):
            idx = asg.members(k)
            w[k], svm_state.alpha[idx] = linsvm.train_ovr(
                xa[idx], ds.target[idx], ds.n_classes, spec.svm_c, strength,
                svm_state.alpha[idx], cfg.svm_tol, cfg.svm_max_epochs,
            )
        return ClusterParams(Task.CLASSIFICATION, w)
    w = np.zeros((asg.k, xa.shape[1]))
    for k in range(asg.k):
        idx = asg.members(k)
        w[k] = _regression_fit(xa[idx], ds.target[idx])
    return ClusterParams(Task.REGRESSION, w)


def centroids(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k).astype(float)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    return sums / np.maximum(counts, 1.0)[:, None]


def member_boxes(x: np.ndarray, labels: np.ndarray, k: int):
    lo = np.full((k, x.shape[1]), np.inf)
    hi = np.full((k, x.shape[1]), -np.inf)
    np.minimum.at(lo, labels, x)
    np.maximum.at(hi, labels, x)
    hi = np.where(hi > lo, hi, lo + BOX_EPS)
    return lo, hi


def repair_empty_clusters(
    ds: Dataset,
    asg: Assignment,
    params: Optional[ClusterParams],
    spec: LossSpec,
    losses: Optional[np.ndarray] = None,
) -> Assignment:
    """Reseed each empty cluster with the worst-fitting movable point.

    A point is movable when its cluster has at least two members. Without
    params (or precomputed losses) every point counts as equally bad and the
    lowest-index movable point is taken.
    """
    sizes = asg.sizes.copy()
    empty = np.flatnonzero(sizes == 0)
    if empty.size == 0:
        return asg
    if asg.k > ds.n:
        raise ValueError(f"cannot fill {asg.k} clusters with {ds.n} points")
    labels = asg.labels.copy()
    if losses is None:
        own = (
            loss_matrix(ds, params, spec)[np.arange(ds.n), labels]
            if params is not None
            else np.zeros(ds.n)
        )
    else:
        own = losses[np.arange(ds.n), labels].copy()
    taken = np.zeros(ds.n, dtype=bool)
    for k in empty:
        movable = (sizes[labels] >= 2) & ~taken
        cand = np.where(movable, own, -np.inf)
        i = int(np.argmax(cand))
        sizes[labels[i]] -= 1
        labels[i] = k
        sizes[k] += 1
        taken[i] = True
    return Assignment(labels, asg.k)


def assignment_step(
    ds: Dataset,
    params: ClusterParams,
    spec: LossSpec,
    cluster_type,
    losses: Optional[np.ndarray] = None,
) -> tuple[Assignment, np.ndarray]:
    """Reassign points given fixed cluster models.

    Every point first goes to the cluster whose model fits it best. For the
    closest-center and bounding-box geometries the centroids of those
    tentative clusters are then used to reassign every point by L2 or L1
    distance respectively. Returns the assignment and the centers that
    define it (the tentative centroids, or the final centroids for the
    arbitrary geometry).
    """
    ct = ClusterType(cluster_type)
    if losses is None:
        losses = loss_matrix(ds, params, spec)
    k = params.k
    tentative = Assignment(np.argmin(losses, axis=1), k)
    if ct is ClusterType.ARBITRARY:
        return tentative, centroids(ds.features, tentative.labels, k)
    if ds.n >= k:
        tentative = repair_empty_clusters(ds, tentative, params, spec, losses)
    z = centroids(ds.features, tentative.labels, k)
    diff = ds.features[:, None, :] - z[None]
    if ct is ClusterType.CLOSEST_CENTER:
        dist = (diff * diff).sum(axis=2)
    else:
        dist = np.abs(diff).sum(axis=2)
    return Assignment(np.argmin(dist, axis=1), k), z


def _resolve_spec(spec: LossSpec, cfg: GreedyConfig) -> LossSpec:
    if spec.kind is LossKind.MAE:
        if cfg.strict_loss:
            raise ValueError("the greedy solver supports MSE and hinge losses only")
        warnings.warn("greedy solver uses squared error; MAE request routed to MSE", stacklevel=3)
        return LossSpec(LossKind.MSE)
    return spec


def _initial_assignment(n: int, k: int, rng: np.random.Generator) -> Assignment:
    # random balanced labelling keeps every cluster non-empty
    return Assignment(rng.permutation(np.arange(n) % k), k)


@dataclass
class _RestartResult:
    assignment: Assignment
    params: ClusterParams
    trace: list[float]
    iterations: int
    converged: bool


def _finalize_params(ds, asg, params, centers, ct) -> ClusterParams:
    boxes = None
    if ct is ClusterType.BOUNDING_BOX:
        boxes = member_boxes(ds.features, asg.labels, asg.k)
    if ct is ClusterType.ARBITRARY:
        centers = centroids(ds.features, asg.labels, asg.k)
    return ClusterParams(params.task, params.weights, centers, boxes)


def _run_restart(ds: Dataset, spec: LossSpec, cfg: GreedyConfig, restart: int) -> _RestartResult:
    rng = np.random.default_rng(cfg.seed + restart)
    ct = cfg.cluster_type
    asg = _initial_assignment(ds.n, cfg.k, rng)
    centers = centroids(ds.features, asg.labels, cfg.k)
    svm_state = _SvmState(ds.n, ds.n_classes) if spec.kind is LossKind.HINGE_WW else None
    trace: list[float] = []
    converged = False
    it = 0
    params = None
    for it in range(1, cfg.max_iters + 1):
        params = optimize_per_cluster(ds, asg, spec, cfg, svm_state)
        losses = loss_matrix(ds, params, spec)
        loss = total_loss(ds, asg, params, spec)
        trace.append(loss)
        if len(trace) > 1:
            prev = trace[-2]
            if abs(loss - prev) / max(prev, 1e-12) < cfg.tol:
                converged = True
                break
        if it == cfg.max_iters:
            break  # keep the assignment the final params were fitted to
        new, new_centers = assignment_step(ds, params, spec, ct, losses)
        new = repair_empty_clusters(ds, new, params, spec, losses)
        if new == asg:
            converged = True
            break
        asg, centers = new, new_centers
    params = _finalize_params(ds, asg, params, centers, ct)
    return _RestartResult(asg, params, trace, it, converged)


def fit(ds: Dataset, spec: LossSpec, cfg: GreedyConfig) -> FitReport:
    """Run ``cfg.restarts`` independent restarts and keep the lowest final loss."""
    if cfg.k > ds.n:
        raise ValueError(f"K={cfg.k} exceeds the number of rows N={ds.n}")
    spec = _resolve_spec(spec, cfg)
    if spec.kind is LossKind.HINGE_WW and ds.task is not Task.CLASSIFICATION:
        raise ValueError("hinge loss requires a classification dataset")
    if spec.kind is not LossKind.HINGE_WW and ds.task is not Task.REGRESSION:
        raise ValueError("regression loss requires a regression dataset")
    start = time.perf_counter()
    restarts = range(cfg.restarts)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda r: _run_restart(ds, spec, cfg, r), restarts))
    else:
        results = [_run_restart(ds, spec, cfg, r) for r in restarts]
    finals = [r.trace[-1] for r in results]
    best = int(np.argmin(finals))  # first minimum wins ties
    res = results[best]
    log.debug("restart losses %s, best %d", finals, best)
    pred = fitted_values(ds, res.assignment.labels, res.params)
    if ds.task is Task.REGRESSION:
        metrics = {"train_r2": r2_score(ds.target, pred)}
    else:
        metrics = {"train_accuracy": accuracy(ds.target, pred)}
    return FitReport(
        assignment=res.assignment,
        params=res.params,
        loss_trace=res.trace,
        iterations=res.iterations,
        converged=res.converged,
        wall_time=time.perf_counter() - start,
        restart_index_of_best=best,
        metrics=metrics,
        restart_losses=finals,
    )
