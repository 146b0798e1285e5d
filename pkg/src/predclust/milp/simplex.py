"""Dense bounded-variable simplex for desk-scale LP relaxations.

Rows are turned into equalities with one slack each, ``A x + s = b``, where
the slack bounds encode the row sense. Every structural variable must have
finite bounds, so any basis can be made dual feasible by parking nonbasic
columns at the bound matching the sign of their reduced cost. The dual
simplex therefore starts from the all-slack basis without a phase 1, and
re-optimizes quickly after branching changes a bound. A primal pass cleans
up in the rare case where numerical drift leaves a column dual infeasible
with no opposite bound to flip to.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg.blas import dger

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
STALL_LIMIT = 50


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class Basis:
    basic: np.ndarray  # row -> column index (structural or slack)
    at_upper: np.ndarray  # per column, meaningful for nonbasic columns


@dataclass
class LPResult:
    status: LPStatus
    x: Optional[np.ndarray]
    objective: float
    basis: Optional[Basis] = None
    iterations: int = 0


class BoundedSimplex:
    """Reusable solver for ``min c'x  s.t.  A x (<=,>=,=) b,  lb <= x <= ub``.

    ``sense`` holds ``'L'``, ``'G'`` or ``'E'`` per row. Bounds are supplied per
    call so branch-and-bound can tighten them between solves.
    """

    def __init__(self, a, sense, rhs, cost):
        a = np.asarray(a, dtype=float)
        self.m, self.n = a.shape
        self.a = np.asfortranarray(a)
        self.full = np.hstack([a, np.eye(self.m)])
        self.rhs = np.asarray(rhs, dtype=float)
        self.cost = np.concatenate([np.asarray(cost, dtype=float), np.zeros(self.m)])
        sense = np.asarray(sense)
        self.slack_lb = np.where(sense == "G", -np.inf, 0.0)
        self.slack_ub = np.where(sense == "L", np.inf, 0.0)
        # cached factorization from the last solve, reused when warm-starting
        self._binv: Optional[np.ndarray] = None
        self._binv_basic: Optional[np.ndarray] = None

    def solve(self, lb, ub, basis: Optional[Basis] = None, max_iter: int = 50_000) -> LPResult:
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
            raise ValueError("all structural variables need finite bounds")
        if np.any(lb > ub + FEAS_TOL):
            return LPResult(LPStatus.INFEASIBLE, None, np.inf)
        run = _Run(self, lb, ub, basis)
        return run.execute(max_iter)


class _Run:
    def __init__(self, lp: BoundedSimplex, lb, ub, basis):
        self.lp = lp
        m, n = lp.m, lp.n
        self.lo = np.concatenate([lb, lp.slack_lb])
        self.hi = np.concatenate([ub, lp.slack_ub])
        self.cost = lp.cost.copy()
        self.shifted = False
        if basis is None:
            self.basic = np.arange(n, n + m)
            self.at_upper = np.zeros(n + m, dtype=bool)
            self.at_upper[:n] = lp.cost[:n] < 0
        else:
            self.basic = basis.basic.copy()
            self.at_upper = basis.at_upper.copy()
        # slack columns can only sit at their finite bound
        self.at_upper[n:] = np.isinf(self.lo[n:])
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[self.basic] = True
        self.iterations = 0
        self.since_refactor = 0
        self.bland = False
        self._factor(reuse=True)

    # -- linear algebra -------------------------------------------------
    def _factor(self, reuse=False):
        lp = self.lp
        if reuse and lp._binv is not None and np.array_equal(lp._binv_basic, self.basic):
            self.binv = lp._binv.copy(order="F")
        else:
            try:
                self.binv = self._invert_basis()
            except np.linalg.LinAlgError:
                self._reset_to_slacks()
        self.since_refactor = 0
        self._recompute()

    def _invert_basis(self):
        """Inverse of the basis matrix, inverting only the structural block.

        With basic structural columns S and basic slacks on rows R, the rows
        T not covered by a slack give a square block ``A[T, S]``; everything
        else follows from it in closed form.
        """
        lp = self.lp
        n, m = lp.n, lp.m
        pos = np.arange(m)
        struct = self.basic < n
        s_cols = self.basic[struct]
        s_pos = pos[struct]
        r_rows = self.basic[~struct] - n
        r_pos = pos[~struct]
        t_rows = np.setdiff1d(pos, r_rows)
        if t_rows.size != s_cols.size:
            raise np.linalg.LinAlgError("basis is singular")
        binv = np.zeros((m, m), order="F")
        binv[r_pos, r_rows] = 1.0
        if s_cols.size:
            inv_ts = np.linalg.inv(lp.a[np.ix_(t_rows, s_cols)])
            binv[np.ix_(s_pos, t_rows)] = inv_ts
            binv[np.ix_(r_pos, t_rows)] = -lp.a[np.ix_(r_rows, s_cols)] @ inv_ts
        return binv

    def _reset_to_slacks(self):
        lp = self.lp
        self.basic = np.arange(lp.n, lp.n + lp.m)
        self.is_basic[:] = False
        self.is_basic[self.basic] = True
        self.binv = np.asfortranarray(np.eye(lp.m))

    def _nonbasic_values(self):
        return np.where(self.at_upper, self.hi, self.lo)

    def _recompute(self):
        lp = self.lp
        xn = self._nonbasic_values()
        xn[self.is_basic] = 0.0
        self.x = xn
        self.x[self.basic] = self.binv @ (lp.rhs - lp.full @ xn)
        y = self.cost[self.basic] @ self.binv
        self.d = self.cost - y @ lp.full
        self.d[self.basic] = 0.0

    def _row(self, r):
        """Row ``r`` of ``B^-1 [A | I]``."""
        br = self.binv[r]
        return np.concatenate([br @ self.lp.a, br])

    def _column(self, q):
        """``B^-1`` times column ``q`` of ``[A | I]``."""
        n = self.lp.n
        if q >= n:
            return self.binv[:, q - n].copy()
        return self.binv @ self.lp.a[:, q]

    def _pivot(self, r, q, alpha_q):
        piv = alpha_q[r]
        row = self.binv[r] / piv
        self.binv = dger(-1.0, alpha_q, row, a=self.binv, overwrite_a=True)
        self.binv[r] = row
        leaving = self.basic[r]
        self.basic[r] = q
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self._factor()
        return leaving

    # -- dual feasibility -------------------------------------------------
    def _restore_dual_feasibility(self):
        """Flip boxed columns with wrong-signed reduced costs; shift costs otherwise."""
        nb = ~self.is_basic
        fixed = self.hi - self.lo <= 0
        bad_low = nb & ~self.at_upper & (self.d < -OPT_TOL) & ~fixed
        bad_up = nb & self.at_upper & (self.d > OPT_TOL) & ~fixed
        bad = bad_low | bad_up
        if not bad.any():
            return
        boxed = np.isfinite(self.lo) & np.isfinite(self.hi)
        flip = bad & boxed
        self.at_upper[flip] = ~self.at_upper[flip]
        shift = bad & ~boxed
        if shift.any():
            self.cost[shift] -= self.d[shift]
            self.shifted = True
        self._recompute()

    # -- main loops -------------------------------------------------------
    def execute(self, max_iter):
        self._restore_dual_feasibility()
        status = self._dual(max_iter)
        if status is LPStatus.OPTIMAL and self.shifted:
            self.cost = self.lp.cost.copy()
            self._recompute()
            status = self._primal(max_iter)
        if status is not LPStatus.OPTIMAL:
            return LPResult(status, None, np.inf, iterations=self.iterations)
        lp = self.lp
        self.lp._binv = self.binv.copy(order="F")
        self.lp._binv_basic = self.basic.copy()
        x = self.x[: lp.n].copy()
        return LPResult(
            LPStatus.OPTIMAL,
            x,
            float(lp.cost[: lp.n] @ x),
            Basis(self.basic.copy(), self.at_upper.copy()),
            self.iterations,
        )

    def _infeasibility(self):
        xb = self.x[self.basic]
        below = self.lo[self.basic] - xb
        above = xb - self.hi[self.basic]
        return below, above

    def _dual(self, max_iter) -> LPStatus:
        lp = self.lp
        best_obj = -np.inf
        stall = 0
        while True:
            if self.iterations >= max_iter:
                return LPStatus.ITERATION_LIMIT
            below, above = self._infeasibility()
            viol = np.maximum(below, above)
            if viol.max(initial=0.0) <= FEAS_TOL:
                if self.since_refactor:
                    self._factor()
                    below, above = self._infeasibility()
                    viol = np.maximum(below, above)
                    if viol.max(initial=0.0) <= FEAS_TOL:
                        return LPStatus.OPTIMAL
                    continue
                return LPStatus.OPTIMAL
            if self.bland:
                cand = np.flatnonzero(viol > FEAS_TOL)
                r = int(cand[np.argmin(self.basic[cand])])
            else:
                r = int(np.argmax(viol))
            to_lower = below[r] > above[r]
            alpha_r = self._row(r)
            nb = ~self.is_basic & (self.hi - self.lo > 0)
            if to_lower:
                elig = nb & ((~self.at_upper & (alpha_r < -PIVOT_TOL)) | (self.at_upper & (alpha_r > PIVOT_TOL)))
            else:
                elig = nb & ((~self.at_upper & (alpha_r > PIVOT_TOL)) | (self.at_upper & (alpha_r < -PIVOT_TOL)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                if self.since_refactor:
                    self._factor()
                    continue
                return LPStatus.INFEASIBLE
            dabs = np.abs(self.d[cand])
            aabs = np.abs(alpha_r[cand])
            ratios = dabs / aabs
            if self.bland:
                tmin = ratios.min()
                ties = cand[ratios <= tmin + 1e-12]
                q = int(ties.min())
            else:
                # Harris two-pass: relaxed bound, then largest pivot among ties
                bound = ((dabs + OPT_TOL) / aabs).min()
                ok = ratios <= bound
                q = int(cand[ok][np.argmax(aabs[ok])])
            alpha_q = self._column(q)
            if abs(alpha_q[r]) < PIVOT_TOL:
                self._factor()
                continue
            leaving = self.basic[r]
            target = self.lo[leaving] if to_lower else self.hi[leaving]
            theta_d = self.d[q] / alpha_r[q]
            self.d -= theta_d * alpha_r
            self.d[leaving] = -theta_d
            self.d[q] = 0.0
            step = (self.x[leaving] - target) / alpha_q[r]
            self.x[self.basic] -= step * alpha_q
            self.x[q] += step
            self.x[leaving] = target
            self.at_upper[leaving] = not to_lower
            self._pivot(r, q, alpha_q)
            obj = float(self.cost @ self.x)
            if obj > best_obj + 1e-12 * max(1.0, abs(best_obj)):
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall >= STALL_LIMIT:
                    self.bland = True

    def _primal(self, max_iter) -> LPStatus:
        lp = self.lp
        self.bland = False
        stall = 0
        best_obj = np.inf
        while True:
            if self.iterations >= max_iter:
                return LPStatus.ITERATION_LIMIT
            nb = ~self.is_basic & (self.hi - self.lo > 0)
            up = nb & ~self.at_upper & (self.d < -OPT_TOL)
            down = nb & self.at_upper & (self.d > OPT_TOL)
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                if self.since_refactor:
                    self._factor()
                    nb = ~self.is_basic & (self.hi - self.lo > 0)
                    if not np.any(nb & ((~self.at_upper & (self.d < -OPT_TOL)) | (self.at_upper & (self.d > OPT_TOL)))):
                        return LPStatus.OPTIMAL
                    continue
                return LPStatus.OPTIMAL
            q = int(cand.min()) if self.bland else int(cand[np.argmax(np.abs(self.d[cand]))])
            sigma = 1.0 if up[q] else -1.0
            alpha_q = self._column(q)
            move = -sigma * alpha_q  # change of basic values per unit step
            xb = self.x[self.basic]
            lob = self.lo[self.basic]
            hib = self.hi[self.basic]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where(move < -PIVOT_TOL, (xb - lob) / -move, np.inf)
                t_inc = np.where(move > PIVOT_TOL, (hib - xb) / move, np.inf)
            t_rows = np.maximum(np.minimum(t_dec, t_inc), 0.0)
            r = int(np.argmin(t_rows)) if t_rows.size else -1
            t_row = t_rows[r] if r >= 0 else np.inf
            t_flip = self.hi[q] - self.lo[q]
            if not np.isfinite(min(t_row, t_flip)):
                return LPStatus.UNBOUNDED
            if t_flip <= t_row:
                self.x[self.basic] += t_flip * move
                self.at_upper[q] = not self.at_upper[q]
                self.x[q] = self.hi[q] if self.at_upper[q] else self.lo[q]
                self.iterations += 1
            else:
                leaving = self.basic[r]
                to_lower = move[r] < 0
                self.x[self.basic] += t_row * move
                self.x[q] += sigma * t_row
                self.x[leaving] = self.lo[leaving] if to_lower else self.hi[leaving]
                alpha_r = self._row(r)
                theta_d = self.d[q] / alpha_r[q]
                self.d -= theta_d * alpha_r
                self.d[leaving] = -theta_d
                self.d[q] = 0.0
                self.at_upper[leaving] = not to_lower
                self._pivot(r, q, alpha_q)
            obj = float(self.cost @ self.x)
            if obj < best_obj - 1e-12 * max(1.0, abs(best_obj)):
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall >= STALL_LIMIT:
                    self.bland = True


def solve_lp(model, lb=None, ub=None) -> LPResult:
    """Solve the continuous relaxation of a MilpModel (integrality dropped)."""
    arr = model.to_arrays()
    lp = BoundedSimplex(arr.a, arr.sense, arr.rhs, arr.cost)
    return lp.solve(arr.lb if lb is None else lb, arr.ub if ub is None else ub)
