"""Scores, in-sample fitted values and test-time cluster routing."""

from __future__ import annotations

import numpy as np
from scipy.special import comb

from .core import ClusterParams, Dataset, Task, augment


def r2_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise ValueError("r2_score needs two non-empty arrays of equal shape")
    ss_res = float(((y_true - y_pred) ** 2).sum())
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    if y_true.shape != y_pred.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(y_true == y_pred))


def rmse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise ValueError("rmse needs two non-empty arrays of equal shape")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


METRICS = {"r2": r2_score, "accuracy": accuracy, "rmse": rmse}


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label arrays must be one-dimensional and equal length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_cells = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all-in-one or all singletons)
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def model_output(xa: np.ndarray, weights: np.ndarray, task: Task) -> np.ndarray:
    """Apply each row's own cluster model; ``weights`` is stacked per row."""
    if task is Task.REGRESSION:
        return np.einsum("nj,nj->n", xa, weights)
    return np.einsum("nj,nmj->nm", xa, weights).argmax(axis=1)


def fitted_values(ds: Dataset, labels, params: ClusterParams) -> np.ndarray:
    """Predictions on the training rows using their assigned clusters."""
    labels = np.asarray(labels)
    return model_output(ds.design, params.weights[labels], ds.task)


def route(x: np.ndarray, params: ClusterParams, cluster_type) -> np.ndarray:
    """Send each new point to a cluster according to the geometry's rule."""
    from .greedy import ClusterType

    x = np.atleast_2d(np.asarray(x, dtype=float))
    ct = ClusterType(cluster_type)
    if ct is ClusterType.BOUNDING_BOX and params.boxes is not None:
        lo, hi = params.boxes
        outside = np.maximum(lo[None] - x[:, None], 0) + np.maximum(x[:, None] - hi[None], 0)
        exterior = outside.sum(axis=2)
        inside = exterior == 0
        volume = np.prod(hi - lo, axis=1)
        # containing box with smallest volume; otherwise nearest box
        key = np.where(inside, volume[None, :], np.inf)
        contained = np.isfinite(key).any(axis=1)
        return np.where(contained, key.argmin(axis=1), exterior.argmin(axis=1))
    if params.centers is None:
        raise ValueError("routing needs cluster centers")
    d2 = ((x[:, None, :] - params.centers[None]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def predict(features, params: ClusterParams, cluster_type) -> np.ndarray:
    """Route new points and apply the chosen cluster's model.

    Regression returns values; classification returns zero-based class codes.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    k = route(x, params, cluster_type)
    return model_output(augment(x), params.weights[k], params.task)
