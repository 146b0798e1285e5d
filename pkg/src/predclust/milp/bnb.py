"""Branch-and-bound over the binary columns of a MilpModel."""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import INT_TOL, MilpModel, Sense
from .simplex import Basis, BoundedSimplex, LPStatus

log = logging.getLogger(__name__)

ABS_TOL = 1e-7
SNAP_TOL = 1e-7  # row violation accepted after rounding binaries


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    GAP_REACHED = "gap_reached"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class BranchRule(str, enum.Enum):
    MOST_FRACTIONAL = "most_fractional"
    FIRST_FRACTIONAL = "first_fractional"


class Search(str, enum.Enum):
    BEST_BOUND = "best_bound"
    DEPTH_FIRST = "depth_first"


@dataclass
class SolveConfig:
    gap_threshold: float = 0.05
    time_limit: float = 3600.0
    node_limit: int = 10_000_000
    branch_rule: BranchRule = BranchRule.MOST_FRACTIONAL
    search: Search = Search.BEST_BOUND
    heuristic_every: int = 10

    def __post_init__(self):
        self.branch_rule = BranchRule(self.branch_rule)
        self.search = Search(self.search)
        if not 0 <= self.gap_threshold < 1:
            raise ValueError("gap_threshold must lie in [0, 1)")
        if not (self.time_limit > 0 and self.node_limit > 0):
            raise ValueError("limits must be positive")


@dataclass
class SolveResult:
    status: Status
    incumbent: Optional[np.ndarray]
    objective: float
    best_bound: float
    gap: float
    nodes: int
    wall_time: float

    @property
    def has_incumbent(self) -> bool:
        return self.incumbent is not None


def relative_gap(objective: float, bound: float) -> float:
    if not np.isfinite(objective):
        return np.inf
    return max(0.0, (objective - bound) / max(abs(objective), 1e-9))


@dataclass(order=True)
class _Node:
    key: tuple
    fixes: tuple = ()  # ((col, value), ...)
    bound: float = -np.inf
    depth: int = 0
    basis: Optional[Basis] = None


def _assignment_groups(model: MilpModel, binary: np.ndarray) -> list[np.ndarray]:
    """Rows of the form sum(binaries) = 1, used by the rounding heuristic."""
    groups = []
    for con in model.constraints:
        if (
            con.sense is Sense.EQ
            and con.rhs == 1.0
            and con.cols
            and all(binary[c] for c in con.cols)
            and all(v == 1.0 for v in con.vals)
        ):
            groups.append(np.array(con.cols))
    return groups


class _Solver:
    def __init__(self, model: MilpModel, cfg: SolveConfig):
        self.model = model
        self.cfg = cfg
        arr = model.to_arrays()
        self.arr = arr
        self.lp = BoundedSimplex(arr.a, arr.sense, arr.rhs, arr.cost)
        self.binary = np.flatnonzero(arr.binary)
        self.groups = _assignment_groups(model, arr.binary)
        grouped = np.zeros(model.n_vars, dtype=bool)
        for g in self.groups:
            grouped[g] = True
        self.loose = np.array([j for j in self.binary if not grouped[j]], dtype=int)
        self.incumbent: Optional[np.ndarray] = None
        self.inc_obj = np.inf
        self.nodes = 0
        self.counter = itertools.count()
        self.start = time.perf_counter()

    def _bounds(self, fixes):
        lb = self.arr.lb.copy()
        ub = self.arr.ub.copy()
        for col, val in fixes:
            lb[col] = ub[col] = val
        return lb, ub

    def _fractional(self, x) -> Optional[int]:
        vals = x[self.binary]
        frac = np.abs(vals - np.round(vals))
        cand = np.flatnonzero(frac > INT_TOL)
        if cand.size == 0:
            return None
        if self.cfg.branch_rule is BranchRule.FIRST_FRACTIONAL:
            return int(self.binary[cand[0]])
        # closest to 0.5; argmin keeps the lowest column on ties
        return int(self.binary[cand[np.argmin(np.abs(vals[cand] - 0.5))]])

    def _offer(self, x, obj) -> bool:
        if obj < self.inc_obj - ABS_TOL * max(1.0, abs(obj)) or (
            abs(obj - self.inc_obj) <= ABS_TOL * max(1.0, abs(obj))
            and self.incumbent is not None
            and tuple(np.round(x[self.binary])) < tuple(np.round(self.incumbent[self.binary]))
        ):
            x = self._snap(x)
            if x is None:
                return False
            self.incumbent = x
            self.inc_obj = self.model.objective_value(x)
            return True
        return False

    def _row_violation(self, x) -> float:
        arr = self.arr
        act = arr.a @ x
        viol = np.where(arr.sense == "L", act - arr.rhs, np.where(arr.sense == "G", arr.rhs - act, np.abs(act - arr.rhs)))
        return float(np.max(viol, initial=0.0))

    def _snap(self, x) -> Optional[np.ndarray]:
        """Round near-integral binaries; re-solve the continuous part if that breaks a row."""
        x = x.copy()
        x[self.binary] = np.round(x[self.binary])
        if self._row_violation(x) <= SNAP_TOL:
            return x
        lb, ub = self._bounds([(int(j), x[j]) for j in self.binary])
        res = self.lp.solve(lb, ub)
        if res.status is not LPStatus.OPTIMAL:
            return None
        y = res.x.copy()
        y[self.binary] = x[self.binary]
        return y if self._row_violation(y) <= SNAP_TOL else None

    def _round_and_fix(self, x, basis):
        """Round binaries (argmax inside assignment rows), fix them, re-solve the LP."""
        fixes = []
        for g in self.groups:
            pick = g[np.argmax(x[g])]
            fixes += [(int(j), 1.0 if j == pick else 0.0) for j in g]
        for j in self.loose:
            fixes.append((int(j), float(round(x[j]))))
        lb, ub = self._bounds(fixes)
        res = self.lp.solve(lb, ub, basis)
        if res.status is LPStatus.OPTIMAL:
            self._offer(res.x, res.objective)

    def _prunable(self, bound) -> bool:
        return bound >= self.inc_obj - ABS_TOL * max(1.0, abs(self.inc_obj))

    def run(self) -> SolveResult:
        cfg = self.cfg
        heap: list[_Node] = []
        depth_first = cfg.search is Search.DEPTH_FIRST
        current: Optional[_Node] = _Node((0,), (), -np.inf, 0, None)
        status = None
        while True:
            if current is None:
                # drop nodes that can no longer improve the incumbent
                while heap and self._prunable(heap[0].bound):
                    heapq.heappop(heap)
                if not heap:
                    break
                current = heapq.heappop(heap)
            elapsed = time.perf_counter() - self.start
            queued = heap[:1] if not depth_first else heap
            open_bound = min([current.bound] + [n.bound for n in queued])
            if self.incumbent is not None and relative_gap(self.inc_obj, open_bound) <= cfg.gap_threshold and cfg.gap_threshold > 0:
                status = Status.GAP_REACHED
                break
            if elapsed > cfg.time_limit:
                status = Status.TIME_LIMIT
                break
            if self.nodes >= cfg.node_limit:
                status = Status.NODE_LIMIT
                break
            node, current = current, None
            if self._prunable(node.bound):
                continue
            self.nodes += 1
            lb, ub = self._bounds(node.fixes)
            res = self.lp.solve(lb, ub, node.basis)
            if res.status is LPStatus.INFEASIBLE:
                continue
            if res.status is not LPStatus.OPTIMAL:
                log.warning("node LP ended with %s; node dropped", res.status.value)
                continue
            if self._prunable(res.objective):
                continue
            col = self._fractional(res.x)
            if col is None:
                self._offer(res.x, res.objective)
                continue
            if self.nodes == 1 or (cfg.heuristic_every and self.nodes % cfg.heuristic_every == 0):
                self._round_and_fix(res.x, res.basis)
                if self._prunable(res.objective):
                    continue
            up_first = res.x[col] >= 0.5
            children = [
                _Node((), node.fixes + ((col, 1.0 if up_first else 0.0),), res.objective, node.depth + 1, res.basis),
                _Node((), node.fixes + ((col, 0.0 if up_first else 1.0),), res.objective, node.depth + 1, res.basis),
            ]
            # plunge into the preferred child, queue the sibling
            current = children[0]
            sib = children[1]
            if depth_first:
                sib.key = (-sib.depth, next(self.counter))
            else:
                sib.key = (sib.bound, -sib.depth, next(self.counter))
            heapq.heappush(heap, sib)
            if not depth_first and heap and heap[0].bound < current.bound - ABS_TOL * max(1.0, abs(current.bound)):
                current.key = (current.bound, -current.depth, next(self.counter))
                heapq.heappush(heap, current)
                current = None
        wall = time.perf_counter() - self.start
        if status is None:
            # tree exhausted
            if self.incumbent is None:
                return SolveResult(Status.INFEASIBLE, None, np.inf, np.inf, np.inf, self.nodes, wall)
            return SolveResult(Status.OPTIMAL, self.incumbent, self.inc_obj, self.inc_obj, 0.0, self.nodes, wall)
        bounds = [n.bound for n in heap]
        if current is not None:
            bounds.append(current.bound)
        best_bound = min(bounds) if bounds else self.inc_obj
        best_bound = min(best_bound, self.inc_obj)
        return SolveResult(
            status,
            self.incumbent,
            self.inc_obj,
            best_bound,
            relative_gap(self.inc_obj, best_bound),
            self.nodes,
            wall,
        )


def solve_milp(model: MilpModel, cfg: Optional[SolveConfig] = None) -> SolveResult:
    """Minimize ``model`` exactly (up to ``cfg.gap_threshold``) by branch-and-bound.

    Node relaxations are warm-started from the parent basis. The search
    plunges into the child on the side the LP value leans to and otherwise
    picks the open node with the lowest bound.
    """
    model.validate()
    cfg = cfg or SolveConfig()
    return _Solver(model, cfg).run()
