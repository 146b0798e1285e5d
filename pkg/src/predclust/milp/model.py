"""Compile a predictive-clustering problem into an explicit MILP.

The product ``loss * c_ik`` is linearized with big-M activation rows: each
(point, cluster) pair gets its own loss variable that is forced up to the
true loss when the point is assigned to the cluster and is free to sit at
zero otherwise. Geometry-specific variables and rows are added on top.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Assignment, ClusterParams, Dataset, LossKind, LossSpec, Task
from ..greedy import ClusterType

INT_TOL = 1e-6


class Sense(str, enum.Enum):
    LE = "L"
    GE = "G"
    EQ = "E"


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    binary: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    cols: tuple[int, ...]
    vals: tuple[float, ...]
    sense: Sense
    rhs: float


@dataclass
class ModelArrays:
    a: np.ndarray
    sense: np.ndarray
    rhs: np.ndarray
    cost: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray


@dataclass
class MilpModel:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    name: str = "PREDCLUST"

    def __post_init__(self):
        self.var_index = {v.name: j for j, v in enumerate(self.variables)}

    # -- construction helpers ------------------------------------------------
    def add_var(self, name: str, lb: float, ub: float, binary: bool = False, obj: float = 0.0) -> int:
        if name in self.var_index:
            raise ValueError(f"duplicate variable {name}")
        j = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), binary))
        self.var_index[name] = j
        if obj:
            self.objective[j] = float(obj)
        return j

    def add_row(self, name: str, terms, sense, rhs: float) -> None:
        merged: dict[int, float] = {}
        for col, val in terms:
            merged[col] = merged.get(col, 0.0) + float(val)
        cols = tuple(sorted(c for c, v in merged.items() if v != 0.0))
        vals = tuple(merged[c] for c in cols)
        self.constraints.append(Constraint(name, cols, vals, Sense(sense), float(rhs)))

    # -- views ---------------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.binary]

    def validate(self) -> None:
        n = self.n_vars
        for con in self.constraints:
            if any(not 0 <= c < n for c in con.cols):
                raise ValueError(f"row {con.name} references a missing column")
        for v in self.variables:
            if v.binary and (v.lb != 0.0 or v.ub != 1.0):
                raise ValueError(f"binary {v.name} must have bounds [0, 1]")
            if v.lb > v.ub:
                raise ValueError(f"variable {v.name} has lb > ub")
        for key in ("M", "M2", "M3"):
            val = self.metadata.get("big_m", {}).get(key)
            if val is None:
                continue
            arr = np.atleast_1d(val)
            if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                raise ValueError(f"big-M {key} must be finite and positive")

    def to_arrays(self) -> ModelArrays:
        m, n = len(self.constraints), self.n_vars
        a = np.zeros((m, n))
        for i, con in enumerate(self.constraints):
            a[i, list(con.cols)] = con.vals
        cost = np.zeros(n)
        for j, v in self.objective.items():
            cost[j] = v
        return ModelArrays(
            a=a,
            sense=np.array([c.sense.value for c in self.constraints]),
            rhs=np.array([c.rhs for c in self.constraints], dtype=float),
            cost=cost,
            lb=np.array([v.lb for v in self.variables]),
            ub=np.array([v.ub for v in self.variables]),
            binary=np.array([v.binary for v in self.variables], dtype=bool),
        )

    def objective_value(self, values) -> float:
        values = np.asarray(values, dtype=float)
        return float(sum(v * values[j] for j, v in self.objective.items()))

    def structurally_equal(self, other: "MilpModel") -> bool:
        return (
            self.variables == other.variables
            and self.constraints == other.constraints
            and {j: v for j, v in self.objective.items() if v}
            == {j: v for j, v in other.objective.items() if v}
        )

    def to_lp_string(self) -> str:
        """Readable dump for debugging; not meant to be parsed back."""
        names = [v.name for v in self.variables]

        def expr(pairs):
            out = []
            for j, v in pairs:
                sign = "-" if v < 0 else "+"
                out.append(f"{sign} {abs(v):.12g} {names[j]}")
            s = " ".join(out).lstrip("+ ")
            return s or "0"

        sym = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
        lines = ["Minimize", " obj: " + expr(sorted(self.objective.items())), "Subject To"]
        for con in self.constraints:
            lines.append(f" {con.name}: {expr(zip(con.cols, con.vals))} {sym[con.sense]} {con.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            lines.append(f" {v.lb:.12g} <= {v.name} <= {v.ub:.12g}")
        bins = [v.name for v in self.variables if v.binary]
        if bins:
            lines.append("Binaries")
            lines.append(" " + " ".join(bins))
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MilpHyper:
    lam: float = 1.0
    theta_bound: float = 100.0
    epsilon: float = 1e-6
    strict_boxes: bool = False

    def __post_init__(self):
        if not self.theta_bound > 0:
            raise ValueError("theta_bound must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class BigM:
    loss: float
    dist: float
    box: np.ndarray  # per feature

    def as_dict(self) -> dict:
        return {"M": self.loss, "M2": self.dist, "M3": [float(v) for v in self.box]}


def compute_big_m(ds: Dataset, spec: LossSpec, theta_bound: float, epsilon: float = 1e-6) -> BigM:
    """Smallest constants that keep every inactive activation row slack.

    ``M`` bounds any per-datum loss for weights in ``[-B, B]``; the L1 norm is
    taken over the augmented row, so the intercept column counts.
    """
    if not theta_bound > 0:
        raise ValueError("theta_bound must be positive")
    x1 = np.abs(ds.design).sum(axis=1).max()
    if spec.kind is LossKind.HINGE_WW:
        m_loss = 2.0 + 2.0 * theta_bound * x1
    else:
        m_loss = float(np.abs(ds.target).max()) + theta_bound * x1
    span = ds.features.max(axis=0) - ds.features.min(axis=0)
    m_dist = float(span.sum()) or epsilon
    return BigM(float(m_loss), m_dist, span + epsilon)


def _check_combo(ds: Dataset, spec: LossSpec, geometry: ClusterType, k: int) -> None:
    if spec.kind is LossKind.MSE:
        raise ValueError("the exact path needs MAE (regression) or hinge (classification) loss")
    if spec.kind is LossKind.HINGE_WW:
        if geometry is ClusterType.ARBITRARY:
            raise ValueError("arbitrary clustering is not offered with hinge loss")
        if ds.task is not Task.CLASSIFICATION:
            raise ValueError("hinge loss needs a classification dataset")
    elif ds.task is not Task.REGRESSION:
        raise ValueError("MAE loss needs a regression dataset")
    if not 1 <= k <= ds.n:
        raise ValueError(f"K={k} must lie in 1..N={ds.n}")


def build_milp(ds: Dataset, spec: LossSpec, geometry, k: int, hyper: Optional[MilpHyper] = None) -> MilpModel:
    geometry = ClusterType(geometry)
    hyper = hyper or MilpHyper()
    _check_combo(ds, spec, geometry, k)
    big = compute_big_m(ds, spec, hyper.theta_bound, hyper.epsilon)
    b = hyper.theta_bound
    n, d = ds.n, ds.d
    xa = ds.design
    model = MilpModel(
        metadata={
            "geometry": geometry.value,
            "loss": spec.kind.value,
            "K": k,
            "N": n,
            "d": d,
            "n_classes": ds.n_classes,
            "lambda": hyper.lam,
            "theta_bound": b,
            "epsilon": hyper.epsilon,
            "strict_boxes": hyper.strict_boxes,
            "svm_c": spec.svm_c,
            "reg_strength": spec.reg_strength,
            "big_m": big.as_dict(),
        }
    )

    c = np.array([[model.add_var(f"c_{i}_{q}", 0, 1, binary=True) for q in range(k)] for i in range(n)])
    for i in range(n):
        model.add_row(f"assign_{i}", [(c[i, q], 1.0) for q in range(k)], Sense.EQ, 1.0)

    big_m = big.loss
    if spec.kind is LossKind.MAE:
        th = np.array([[model.add_var(f"th_{q}_{j}", -b, b) for j in range(d + 1)] for q in range(k)])
        for i in range(n):
            for q in range(k):
                e = model.add_var(f"e_{i}_{q}", 0, big_m, obj=1.0)
                fit = [(th[q, j], xa[i, j]) for j in range(d + 1)]
                # e >= (y - th'x) - M(1 - c)
                model.add_row(
                    f"actp_{i}_{q}", [(e, 1.0), *fit, (c[i, q], -big_m)], Sense.GE, ds.target[i] - big_m
                )
                # e >= (th'x - y) - M(1 - c)
                model.add_row(
                    f"actn_{i}_{q}",
                    [(e, 1.0), *[(col, -v) for col, v in fit], (c[i, q], -big_m)],
                    Sense.GE,
                    -ds.target[i] - big_m,
                )
    else:
        m_cls = ds.n_classes
        reg = spec.reg_strength
        thp = np.empty((k, m_cls, d + 1), dtype=int)
        thn = np.empty((k, m_cls, d + 1), dtype=int)
        for q in range(k):
            for m in range(m_cls):
                for j in range(d + 1):
                    thp[q, m, j] = model.add_var(f"thp_{q}_{m}_{j}", 0, b, obj=reg)
                    thn[q, m, j] = model.add_var(f"thn_{q}_{m}_{j}", 0, b, obj=reg)
        for i in range(n):
            yi = int(ds.target[i])
            for q in range(k):
                for m in range(m_cls):
                    if m == yi:
                        continue
                    xi = model.add_var(f"xi_{i}_{q}_{m}", 0, big_m, obj=spec.svm_c)
                    terms = [(xi, 1.0), (c[i, q], -big_m)]
                    for j in range(d + 1):
                        v = xa[i, j]
                        terms += [(thp[q, yi, j], v), (thn[q, yi, j], -v)]
                        terms += [(thp[q, m, j], -v), (thn[q, m, j], v)]
                    # th_y'x - th_m'x + xi >= 2 - M(1 - c)
                    model.add_row(f"hinge_{i}_{q}_{m}", terms, Sense.GE, 2.0 - big_m)

    lo = ds.features.min(axis=0)
    hi = ds.features.max(axis=0)
    span = hi - lo
    x = ds.features
    if geometry is ClusterType.CLOSEST_CENTER:
        beta = np.array([[model.add_var(f"beta_{q}_{j}", lo[j], hi[j]) for j in range(d)] for q in range(k)])
        dist = [model.add_var(f"dist_{i}", 0, big.dist, obj=hyper.lam) for i in range(n)]
        for i in range(n):
            for q in range(k):
                u = []
                for j in range(d):
                    uj = model.add_var(f"u_{i}_{q}_{j}", 0, span[j])
                    u.append(uj)
                    model.add_row(f"absp_{i}_{q}_{j}", [(uj, 1.0), (beta[q, j], 1.0)], Sense.GE, x[i, j])
                    model.add_row(f"absn_{i}_{q}_{j}", [(uj, 1.0), (beta[q, j], -1.0)], Sense.GE, -x[i, j])
                # d_i >= sum_j u - M2 (1 - c)
                model.add_row(
                    f"dist_{i}_{q}",
                    [(dist[i], 1.0), *[(uj, -1.0) for uj in u], (c[i, q], -big.dist)],
                    Sense.GE,
                    -big.dist,
                )
    elif geometry is ClusterType.BOUNDING_BOX:
        eps = hyper.epsilon
        bmin = np.array([[model.add_var(f"bmin_{q}_{j}", lo[j] - eps, hi[j] + eps) for j in range(d)] for q in range(k)])
        bmax = np.array([[model.add_var(f"bmax_{q}_{j}", lo[j] - eps, hi[j] + eps) for j in range(d)] for q in range(k)])
        m3 = big.box
        for q in range(k):
            for j in range(d):
                model.add_row(f"width_{q}_{j}", [(bmax[q, j], 1.0), (bmin[q, j], -1.0)], Sense.GE, eps)
        for i in range(n):
            for q in range(k):
                for j in range(d):
                    # c = 1  =>  bmin <= x <= bmax
                    model.add_row(
                        f"inlo_{i}_{q}_{j}", [(bmin[q, j], 1.0), (c[i, q], m3[j])], Sense.LE, x[i, j] + m3[j]
                    )
                    model.add_row(
                        f"inhi_{i}_{q}_{j}", [(bmax[q, j], 1.0), (c[i, q], -m3[j])], Sense.GE, x[i, j] - m3[j]
                    )
        if hyper.strict_boxes:
            wide = span + 2 * eps
            for i in range(n):
                for q in range(k):
                    outs = []
                    for j in range(d):
                        ol = model.add_var(f"outlo_{i}_{q}_{j}", 0, 1, binary=True)
                        oh = model.add_var(f"outhi_{i}_{q}_{j}", 0, 1, binary=True)
                        outs += [ol, oh]
                        # outlo = 1  =>  x <= bmin - eps
                        model.add_row(
                            f"exlo_{i}_{q}_{j}", [(bmin[q, j], 1.0), (ol, -wide[j])], Sense.GE, x[i, j] + eps - wide[j]
                        )
                        # outhi = 1  =>  x >= bmax + eps
                        model.add_row(
                            f"exhi_{i}_{q}_{j}", [(bmax[q, j], 1.0), (oh, wide[j])], Sense.LE, x[i, j] - eps + wide[j]
                        )
                    # inside on every axis  =>  assigned to this box
                    model.add_row(f"cover_{i}_{q}", [(c[i, q], 1.0), *[(o, 1.0) for o in outs]], Sense.GE, 1.0)
    model.validate()
    return model


def _binary_value(values, j: int, name: str) -> int:
    v = float(values[j])
    r = round(v)
    if abs(v - r) > INT_TOL or r not in (0, 1):
        raise ValueError(f"binary {name} has non-integral value {v!r}")
    return int(r)


def decode(model: MilpModel, values, ds: Optional[Dataset] = None) -> tuple[Assignment, ClusterParams]:
    """Read assignment, weights and geometry back out of a solution vector."""
    meta = model.metadata
    values = np.asarray(values, dtype=float)
    n, k, d = meta["N"], meta["K"], meta["d"]
    if ds is not None and (ds.n != n or ds.d != d):
        raise ValueError("dataset does not match the model dimensions")
    idx = model.var_index
    cmat = np.array(
        [[_binary_value(values, idx[f"c_{i}_{q}"], f"c_{i}_{q}") for q in range(k)] for i in range(n)]
    )
    asg = Assignment.from_matrix(cmat)
    if meta["loss"] == LossKind.HINGE_WW.value:
        m_cls = meta["n_classes"]
        w = np.array(
            [
                [
                    [values[idx[f"thp_{q}_{m}_{j}"]] - values[idx[f"thn_{q}_{m}_{j}"]] for j in range(d + 1)]
                    for m in range(m_cls)
                ]
                for q in range(k)
            ]
        )
        task = Task.CLASSIFICATION
    else:
        w = np.array([[values[idx[f"th_{q}_{j}"]] for j in range(d + 1)] for q in range(k)])
        task = Task.REGRESSION
    centers = boxes = None
    geometry = ClusterType(meta["geometry"])
    if geometry is ClusterType.CLOSEST_CENTER:
        centers = np.array([[values[idx[f"beta_{q}_{j}"]] for j in range(d)] for q in range(k)])
    elif geometry is ClusterType.BOUNDING_BOX:
        lo = np.array([[values[idx[f"bmin_{q}_{j}"]] for j in range(d)] for q in range(k)])
        hi = np.array([[values[idx[f"bmax_{q}_{j}"]] for j in range(d)] for q in range(k)])
        boxes = (lo, np.maximum(hi, np.nextafter(lo, np.inf)))
    return asg, ClusterParams(task, w, centers, boxes)


def objective_extras(model: MilpModel, values) -> float:
    """Objective part that is not prediction loss: the weighted distance term."""
    if model.metadata["geometry"] != ClusterType.CLOSEST_CENTER.value:
        return 0.0
    lam = model.metadata["lambda"]
    n = model.metadata["N"]
    idx = model.var_index
    return lam * float(sum(values[idx[f"dist_{i}"]] for i in range(n)))


@dataclass
class SolutionCheck:
    feasible: bool
    max_violation: float
    objective: float
    integrality_violation: float = 0.0


def check_solution(model: MilpModel, values, tol: float = 1e-6) -> SolutionCheck:
    """Worst bound, row and integrality violation at a given point."""
    values = np.asarray(values, dtype=float)
    if values.shape != (model.n_vars,):
        raise ValueError(f"expected {model.n_vars} values, got {values.shape}")
    arr = model.to_arrays()
    worst = max(
        float(np.max(arr.lb - values, initial=0.0)),
        float(np.max(values - arr.ub, initial=0.0)),
    )
    act = arr.a @ values if arr.a.size else np.zeros(0)
    le = arr.sense == "L"
    ge = arr.sense == "G"
    eq = arr.sense == "E"
    row_viol = np.concatenate(
        [act[le] - arr.rhs[le], arr.rhs[ge] - act[ge], np.abs(act[eq] - arr.rhs[eq])]
    )
    worst = max(worst, float(np.max(row_viol, initial=0.0)))
    bins = values[arr.binary]
    int_viol = float(np.max(np.abs(bins - np.round(bins)), initial=0.0))
    worst = max(worst, int_viol)
    return SolutionCheck(worst <= tol, worst, float(arr.cost @ values), int_viol)


def point_from_solution(
    model: MilpModel, ds: Dataset, asg: Assignment, params: ClusterParams, spec: LossSpec
) -> np.ndarray:
    """Build the tightest feasible vector for a given (assignment, params).

    Loss, slack and distance variables are set to their smallest feasible
    values; boxes default to member min/max when params carry none.
    """
    meta = model.metadata
    idx = model.var_index
    n, k, d = meta["N"], meta["K"], meta["d"]
    v = np.zeros(model.n_vars)
    for i in range(n):
        v[idx[f"c_{i}_{asg.labels[i]}"]] = 1.0
    xa = ds.design
    w = params.weights
    if meta["loss"] == LossKind.HINGE_WW.value:
        m_cls = meta["n_classes"]
        for q in range(k):
            for m in range(m_cls):
                for j in range(d + 1):
                    v[idx[f"thp_{q}_{m}_{j}"]] = max(w[q, m, j], 0.0)
                    v[idx[f"thn_{q}_{m}_{j}"]] = max(-w[q, m, j], 0.0)
        for i in range(n):
            q = asg.labels[i]
            yi = int(ds.target[i])
            s = w[q] @ xa[i]
            for m in range(m_cls):
                if m != yi:
                    v[idx[f"xi_{i}_{q}_{m}"]] = max(0.0, 2.0 - (s[yi] - s[m]))
    else:
        for q in range(k):
            for j in range(d + 1):
                v[idx[f"th_{q}_{j}"]] = w[q, j]
        for i in range(n):
            q = asg.labels[i]
            v[idx[f"e_{i}_{q}"]] = abs(ds.target[i] - w[q] @ xa[i])
    geometry = ClusterType(meta["geometry"])
    x = ds.features
    if geometry is ClusterType.CLOSEST_CENTER:
        centers = params.centers
        if centers is None:
            from ..greedy import centroids

            centers = centroids(x, asg.labels, k)
        lo, hi = x.min(axis=0), x.max(axis=0)
        centers = np.clip(centers, lo, hi)
        for q in range(k):
            for j in range(d):
                v[idx[f"beta_{q}_{j}"]] = centers[q, j]
        for i in range(n):
            for q in range(k):
                for j in range(d):
                    v[idx[f"u_{i}_{q}_{j}"]] = abs(x[i, j] - centers[q, j])
            v[idx[f"dist_{i}"]] = np.abs(x[i] - centers[asg.labels[i]]).sum()
    elif geometry is ClusterType.BOUNDING_BOX:
        eps = meta["epsilon"]
        lo_all = x.min(axis=0)
        for q in range(k):
            members = x[asg.labels == q]
            for j in range(d):
                if members.size:
                    blo, bhi = members[:, j].min(), members[:, j].max()
                else:
                    blo = bhi = lo_all[j]
                if bhi - blo < eps:
                    bhi = blo + eps
                v[idx[f"bmin_{q}_{j}"]] = blo
                v[idx[f"bmax_{q}_{j}"]] = bhi
        if meta["strict_boxes"]:
            raise ValueError("tight points are not constructed for strict box models")
    return v
