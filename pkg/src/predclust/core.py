"""Data model, CSV ingestion, standardization and the shared loss contract.

Cluster and class indices are zero-based everywhere inside the package
(clusters ``0..K-1``, classes ``0..M-1``). The original class labels are kept
in ``Dataset.label_map`` for reporting.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class Task(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class LossKind(str, enum.Enum):
    MAE = "mae"
    MSE = "mse"
    HINGE_WW = "hinge"


class Regularization(str, enum.Enum):
    NONE = "none"
    L1 = "l1"
    L2 = "l2"


class DataError(ValueError):
    """Raised for malformed input data (missing columns, bad cells, ...)."""


@dataclass(frozen=True)
class Scaler:
    """Per-column affine transform ``z = (x - mean) / scale``."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        # constant columns are centred only
        scale = np.where(std > 0, std, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.scale + self.mean


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    task: Task = Task.REGRESSION
    n_classes: int = 0
    column_names: tuple[str, ...] = ()
    label_map: tuple = ()
    scaler: Optional[Scaler] = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"features must be a non-empty N x d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite entries")
        task = Task(self.task)
        if task is Task.CLASSIFICATION:
            y = np.asarray(self.target)
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("classification targets must be integer class codes")
            y = y.astype(np.int64)
            m = self.n_classes or int(y.max()) + 1
            if y.min() < 0 or y.max() >= m:
                raise DataError(f"class codes must lie in 0..{m - 1}")
            if len(np.unique(y)) != m:
                raise DataError("every class must appear at least once")
            object.__setattr__(self, "n_classes", m)
        else:
            y = np.asarray(self.target, dtype=float)
            if not np.all(np.isfinite(y)):
                raise DataError("target contains non-finite entries")
        if y.shape != (x.shape[0],):
            raise DataError(f"target length {y.shape} does not match {x.shape[0]} rows")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "task", task)
        names = tuple(self.column_names) or tuple(f"x{j}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError("column_names length does not match feature count")
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def design(self) -> np.ndarray:
        """Features with a trailing constant-1 column for the intercept."""
        return augment(self.features)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        y = self.target[rows]
        return Dataset(
            self.features[rows],
            y,
            task=self.task,
            n_classes=self.n_classes if self.task is Task.CLASSIFICATION else 0,
            column_names=self.column_names,
            label_map=self.label_map,
            scaler=self.scaler,
        )


def augment(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.append(x, 1.0)
    return np.hstack([x, np.ones((x.shape[0], 1))])


@dataclass(frozen=True)
class Assignment:
    """Hard partition of N rows into K clusters, stored as integer labels."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if self.k < 1:
            raise ValueError("K must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"labels must lie in 0..{self.k - 1}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_matrix(cls, c) -> "Assignment":
        c = np.asarray(c)
        if c.ndim != 2:
            raise ValueError("assignment matrix must be N x K")
        if not np.all((c == 0) | (c == 1)):
            raise ValueError("assignment matrix must be binary")
        bad = np.flatnonzero(c.sum(axis=1) != 1)
        if bad.size:
            raise ValueError(f"row {bad[0]} is not assigned to exactly one cluster")
        return cls(c.argmax(axis=1), c.shape[1])

    @property
    def matrix(self) -> np.ndarray:
        c = np.zeros((self.labels.size, self.k), dtype=np.int8)
        c[np.arange(self.labels.size), self.labels] = 1
        return c

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True)
class ClusterParams:
    """Per-cluster model weights plus optional geometry artifacts.

    ``weights`` is ``K x (d+1)`` for regression and ``K x M x (d+1)`` for
    classification; the last weight of every model is the intercept.
    """

    task: Task
    weights: np.ndarray
    centers: Optional[np.ndarray] = None
    boxes: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        want = 2 if Task(self.task) is Task.REGRESSION else 3
        if w.ndim != want:
            raise ValueError(f"weights must have {want} dimensions, got {w.ndim}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "weights", w)
        if self.centers is not None:
            object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        if self.boxes is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.boxes)
            if lo.shape != hi.shape:
                raise ValueError("box bounds must have matching shapes")
            if not np.all(hi > lo):
                raise ValueError("box upper bounds must exceed lower bounds")
            object.__setattr__(self, "boxes", (lo, hi))

    @property
    def k(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.MSE
    svm_c: float = 1.0
    regularization: Regularization = Regularization.NONE
    reg_strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        object.__setattr__(self, "regularization", Regularization(self.regularization))
        if self.kind is LossKind.HINGE_WW and not self.svm_c > 0:
            raise ValueError("svm_c must be positive for hinge loss")
        if self.reg_strength < 0:
            raise ValueError("reg_strength must be nonnegative")

    @classmethod
    def hinge_l1(cls, svm_c: float = 1.0, strength: float = 1.0) -> "LossSpec":
        """Multi-class hinge with an L1 weight penalty, as used by the exact path."""
        return cls(LossKind.HINGE_WW, svm_c, Regularization.L1, strength)

    @classmethod
    def hinge_l2(cls, svm_c: float = 1.0, strength: float = 1.0) -> "LossSpec":
        return cls(LossKind.HINGE_WW, svm_c, Regularization.L2, strength)


def _hinge_ww(scores: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sum over wrong classes of max(0, 2 - (score_y - score_m)); scores is (..., M)."""
    true = np.take_along_axis(scores, y[..., None], axis=-1)
    slack = np.maximum(0.0, 2.0 - (true - scores))
    # the true class contributes max(0, 2) = 2, remove it
    return slack.sum(axis=-1) - 2.0


def per_datum_loss(x, y, theta, spec: LossSpec) -> float:
    """Loss of one augmented row ``x`` (length d+1) under one cluster's model."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: x has {x.shape[0]} entries, theta {theta.shape}")
    if spec.kind is LossKind.HINGE_WW:
        if theta.ndim != 2:
            raise ValueError("hinge loss needs an M x (d+1) weight matrix")
        y = int(y)
        if not 0 <= y < theta.shape[0]:
            raise ValueError(f"class index {y} out of range for {theta.shape[0]} classes")
        return float(_hinge_ww(theta @ x, np.asarray(y)))
    if theta.ndim != 1:
        raise ValueError("regression loss needs a weight vector")
    r = float(y) - float(theta @ x)
    return abs(r) if spec.kind is LossKind.MAE else r * r


def loss_matrix(ds: Dataset, params: ClusterParams, spec: LossSpec) -> np.ndarray:
    """N x K matrix of per-datum losses of every row under every cluster model."""
    xa = ds.design
    w = params.weights
    if w.shape[-1] != xa.shape[1]:
        raise ValueError(f"weights expect {w.shape[-1]} columns, data has {xa.shape[1]}")
    if spec.kind is LossKind.HINGE_WW:
        if ds.task is not Task.CLASSIFICATION:
            raise ValueError("hinge loss requires a classification dataset")
        scores = np.einsum("nj,kmj->nkm", xa, w)
        y = np.broadcast_to(ds.target[:, None], scores.shape[:2])
        return _hinge_ww(scores, y)
    r = ds.target[:, None] - xa @ w.T
    return np.abs(r) if spec.kind is LossKind.MAE else r * r


def regularization_term(params: ClusterParams, spec: LossSpec) -> float:
    if spec.regularization is Regularization.NONE or spec.reg_strength == 0:
        return 0.0
    w = params.weights
    if spec.regularization is Regularization.L1:
        return spec.reg_strength * float(np.abs(w).sum())
    return 0.5 * spec.reg_strength * float((w * w).sum())


def data_loss(ds: Dataset, asg: Assignment, params: ClusterParams, spec: LossSpec) -> float:
    """Sum of per-datum losses, each row counted under its own cluster only."""
    if asg.labels.shape[0] != ds.n:
        raise ValueError(f"assignment covers {asg.labels.shape[0]} rows, dataset has {ds.n}")
    if asg.k != params.k:
        raise ValueError(f"assignment has K={asg.k}, params have K={params.k}")
    lm = loss_matrix(ds, params, spec)
    return float(lm[np.arange(ds.n), asg.labels].sum())


def total_loss(ds: Dataset, asg: Assignment, params: ClusterParams, spec: LossSpec) -> float:
    """Overall objective.

    For hinge loss the data term is weighted by ``svm_c`` and the weight
    penalty is added once, so that the result has the same form as the
    exact-path objective. Regression losses are unweighted.
    """
    dl = data_loss(ds, asg, params, spec)
    if spec.kind is LossKind.HINGE_WW:
        dl *= spec.svm_c
    return dl + regularization_term(params, spec)


def load_csv(
    path,
    target_column: str,
    task: Task | str = Task.REGRESSION,
    standardize: bool = True,
    exclude: Sequence[str] = (),
) -> Dataset:
    """Read a headed CSV into a Dataset.

    All columns except the target (and ``exclude``) become features and must
    be numeric. Classification targets may be any strings; they are mapped to
    dense codes in order of first sorted appearance.
    """
    task = Task(task)
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path} has a header but no data rows")
    if target_column not in header:
        raise DataError(f"target column {target_column!r} not found in {path}")
    for name in exclude:
        if name not in header:
            raise DataError(f"column {name!r} not found in {path}")
    t_idx = header.index(target_column)
    f_idx = [j for j, h in enumerate(header) if j != t_idx and h not in exclude]
    if not f_idx:
        raise DataError("no feature columns")

    x = np.empty((len(body), len(f_idx)))
    raw_y = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"line {i}: expected {len(header)} cells, got {len(row)}")
        for out_j, j in enumerate(f_idx):
            try:
                x[i - 2, out_j] = float(row[j])
            except ValueError:
                raise DataError(
                    f"line {i}, column {header[j]!r}: non-numeric value {row[j]!r}"
                ) from None
        raw_y.append(row[t_idx].strip())

    names = tuple(header[j] for j in f_idx)
    scaler = None
    if standardize:
        scaler = Scaler.fit(x)
        x = scaler.transform(x)

    if task is Task.CLASSIFICATION:
        labels = _sorted_labels(raw_y)
        code = {lab: c for c, lab in enumerate(labels)}
        y = np.array([code[v] for v in raw_y])
        return Dataset(x, y, task, len(labels), names, tuple(labels), scaler)

    y = np.empty(len(raw_y))
    for i, v in enumerate(raw_y):
        try:
            y[i] = float(v)
        except ValueError:
            raise DataError(
                f"line {i + 2}, column {target_column!r}: non-numeric value {v!r}"
            ) from None
    return Dataset(x, y, task, 0, names, (), scaler)


def _sorted_labels(values):
    uniq = set(values)
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return sorted(uniq)


def write_csv(path, ds: Dataset, target_name: str = "y", extra: Optional[dict] = None) -> None:
    """Write a dataset (in its stored feature scale) as a headed CSV."""
    extra = extra or {}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.column_names, target_name, *extra])
        for i in range(ds.n):
            y = ds.target[i]
            if ds.task is Task.CLASSIFICATION and ds.label_map:
                y = ds.label_map[int(y)]
            w.writerow(
                [repr(float(v)) for v in ds.features[i]]
                + [y if ds.task is Task.CLASSIFICATION else repr(float(y))]
                + [col[i] for col in extra.values()]
            )

