"""Synthetic clusterwise regression / classification data with known labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Task


@dataclass
class SynthSpec:
    task: Task = Task.REGRESSION
    k_true: int = 3
    n: int = 600
    d: int = 2
    separation: float = 8.0
    noise_sigma: float = 0.5
    label_flip_prob: float = 0.0
    weight_range: float = 5.0
    margin: float = 0.25
    seed: int = 0

    def __post_init__(self):
        self.task = Task(self.task)
        if self.k_true < 1 or self.d < 1:
            raise ValueError("k_true and d must be positive")
        if self.n < self.k_true:
            raise ValueError("need at least one point per cluster")
        if self.noise_sigma < 0 or not 0 <= self.label_flip_prob <= 1:
            raise ValueError("noise parameters must be nonnegative (flip prob in [0, 1])")


def blob_centers(k: int, d: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample ``k`` centers with pairwise distance >= separation."""
    side = separation * max(2.0, k ** (1.0 / d) * 1.5)
    for _ in range(10_000):
        c = rng.uniform(0.0, side, size=(k, d))
        diff = c[:, None] - c[None]
        dist = np.sqrt((diff**2).sum(axis=2))
        if k == 1 or dist[np.triu_indices(k, 1)].min() >= separation:
            return c
        side *= 1.01
    raise RuntimeError("could not place separated blob centers")


def _blobs(spec: SynthSpec, rng: np.random.Generator):
    centers = blob_centers(spec.k_true, spec.d, spec.separation, rng)
    labels = rng.permutation(np.arange(spec.n) % spec.k_true)
    x = centers[labels] + rng.standard_normal((spec.n, spec.d))
    return x, labels, centers


def gen_regression(spec: SynthSpec):
    """Gaussian blobs, each with its own random plane; returns (Dataset, labels, weights).

    ``weights`` is ``K x (d+1)`` with the intercept last.
    """
    rng = np.random.default_rng(spec.seed)
    x, labels, _ = _blobs(spec, rng)
    w = rng.uniform(-spec.weight_range, spec.weight_range, size=(spec.k_true, spec.d + 1))
    y = np.einsum("nj,nj->n", x, w[labels, :-1]) + w[labels, -1]
    y = y + spec.noise_sigma * rng.standard_normal(spec.n)
    names = tuple(f"x{j + 1}" for j in range(spec.d))
    return Dataset(x, y, Task.REGRESSION, column_names=names), labels, w


def gen_classification(spec: SynthSpec):
    """Gaussian blobs split into two classes by a random hyperplane through each center.

    Points closer than ``margin`` to their blob's hyperplane are pushed out to
    the margin, then labels are flipped with ``label_flip_prob``. Returns
    (Dataset, labels, hyperplanes) where hyperplanes is ``K x (d+1)``
    (unit normal, offset) so class 0 satisfies ``normal'x + offset > 0``.
    """
    rng = np.random.default_rng(spec.seed)
    x, labels, centers = _blobs(spec, rng)
    normals = rng.standard_normal((spec.k_true, spec.d))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = -np.einsum("kj,kj->k", normals, centers)
    side = np.einsum("nj,nj->n", x, normals[labels]) + offsets[labels]
    sign = np.where(side >= 0, 1.0, -1.0)
    push = np.maximum(spec.margin - np.abs(side), 0.0)
    x = x + (sign * push)[:, None] * normals[labels]
    y = np.where(sign > 0, 0, 1)
    flip = rng.random(spec.n) < spec.label_flip_prob
    y = np.where(flip, 1 - y, y)
    if len(np.unique(y)) < 2:
        y[0] = 1 - y[0]
    planes = np.hstack([normals, offsets[:, None]])
    names = tuple(f"x{j + 1}" for j in range(spec.d))
    return Dataset(x, y, Task.CLASSIFICATION, 2, names, (0, 1)), labels, planes
