"""Reference implementations used only by the tests.

None of these share code with the package: a textbook two-phase tableau
simplex, exhaustive assignment enumeration with LAD fits, and pair-counting
Rand statistics.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def tableau_lp(c, a, sense, b, lb, ub):
    """min c'x  s.t.  a x {<=,>=,=} b,  lb <= x <= ub (all finite).

    Shifts x = lb + z, adds z <= ub - lb as ordinary rows, then runs a
    two-phase tableau simplex with Bland's rule. Returns (status, x, obj).
    """
    c = np.asarray(c, float)
    a = np.atleast_2d(np.asarray(a, float))
    b = np.asarray(b, float)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    n = c.size
    rows, rhs, kinds = [], [], []
    for i in range(a.shape[0]):
        rows.append(a[i])
        rhs.append(b[i] - a[i] @ lb)
        kinds.append(sense[i])
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(e)
        rhs.append(ub[j] - lb[j])
        kinds.append("L")
    # normalize to nonnegative rhs
    for i in range(len(rows)):
        if rhs[i] < 0:
            rows[i] = -rows[i]
            rhs[i] = -rhs[i]
            kinds[i] = {"L": "G", "G": "L", "E": "E"}[kinds[i]]
    m = len(rows)
    n_slack = sum(k != "E" for k in kinds)
    n_art = sum(k != "L" for k in kinds)
    width = n + n_slack + n_art
    t = np.zeros((m, width + 1))
    basis = []
    s_col, a_col = n, n + n_slack
    art_cols = []
    for i, (r, h, k) in enumerate(zip(rows, rhs, kinds)):
        t[i, :n] = r
        t[i, -1] = h
        if k == "L":
            t[i, s_col] = 1.0
            basis.append(s_col)
            s_col += 1
        elif k == "G":
            t[i, s_col] = -1.0
            s_col += 1
            t[i, a_col] = 1.0
            basis.append(a_col)
            art_cols.append(a_col)
            a_col += 1
        else:
            t[i, a_col] = 1.0
            basis.append(a_col)
            art_cols.append(a_col)
            a_col += 1

    def run(cost, allowed):
        for _ in range(20000):
            cb = cost[basis]
            red = cost - cb @ t[:, :-1]
            enter = next((j for j in range(width) if allowed[j] and red[j] < -1e-10), None)
            if enter is None:
                return "optimal"
            col = t[:, enter]
            ratios = [(t[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > 1e-12]
            if not ratios:
                return "unbounded"
            _, _, r = min(ratios)
            t[r] /= t[r, enter]
            for i in range(m):
                if i != r and t[i, enter] != 0.0:
                    t[i] -= t[i, enter] * t[r]
            basis[r] = enter
        raise RuntimeError("tableau oracle did not terminate")

    allowed = np.ones(width, bool)
    if art_cols:
        phase1 = np.zeros(width)
        phase1[art_cols] = 1.0
        run(phase1, allowed)
        if sum(t[i, -1] for i in range(m) if basis[i] in art_cols) > 1e-7:
            return "infeasible", None, None
        allowed[art_cols] = False
        # drive remaining zero-level artificials out of the basis
        for i in range(m):
            if basis[i] in art_cols:
                j = next((j for j in range(width) if allowed[j] and abs(t[i, j]) > 1e-9), None)
                if j is not None:
                    t[i] /= t[i, j]
                    for r in range(m):
                        if r != i and t[r, j] != 0.0:
                            t[r] -= t[r, j] * t[i]
                    basis[i] = j
    full = np.zeros(width)
    full[:n] = c
    status = run(full, allowed)
    if status != "optimal":
        return status, None, None
    z = np.zeros(width)
    for i, j in enumerate(basis):
        z[j] = t[i, -1]
    x = lb + z[:n]
    return "optimal", x, float(c @ x)


def lad_objective(xa, y, bound, lp):
    """min sum |y - xa w| over |w| <= bound, via the given LP callable.

    ``lp(c, a, sense, b, lb, ub) -> objective``.
    """
    n, p = xa.shape
    if n == 0:
        return 0.0
    c = np.r_[np.zeros(p), np.ones(2 * n)]
    a = np.hstack([xa, np.eye(n), -np.eye(n)])
    big = 10.0 * (np.abs(y).sum() + bound * np.abs(xa).sum()) + 1.0
    lb = np.r_[-bound * np.ones(p), np.zeros(2 * n)]
    ub = np.r_[bound * np.ones(p), big * np.ones(2 * n)]
    return lp(c, a, ["E"] * n, y, lb, ub)


def brute_force_clr_mae(xa, y, k, bound, lp):
    """Exhaustive optimum of clusterwise LAD over every labeling.

    Returns (best objective, best labeling). Labelings that differ only by
    a cluster permutation are visited once (first point fixed to cluster 0).
    """
    n = len(y)
    best, best_lab = np.inf, None
    cache = {}
    for tail in itertools.product(range(k), repeat=n - 1):
        lab = (0,) + tail
        total = 0.0
        for q in range(k):
            members = tuple(i for i in range(n) if lab[i] == q)
            if members not in cache:
                idx = list(members)
                cache[members] = lad_objective(xa[idx], y[idx], bound, lp)
            total += cache[members]
        if total < best - 1e-12:
            best, best_lab = total, lab
    return best, np.array(best_lab)


def ari_pair_counting(a, b) -> float:
    """Adjusted Rand index from explicit pair agreement counts (exact arithmetic)."""
    a, b = list(a), list(b)
    n = len(a)
    same_a = same_b = both = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            same_a += sa
            same_b += sb
            both += sa and sb
    total = n * (n - 1) // 2
    expected = Fraction(same_a * same_b, total)
    max_index = Fraction(same_a + same_b, 2)
    if max_index == expected:
        return 1.0
    return float((both - expected) / (max_index - expected))


def ww_hinge_reference(scores, y) -> float:
    """Weston-Watkins slack sum for one row by direct loop."""
    return sum(max(0.0, 2.0 - (scores[y] - scores[m])) for m in range(len(scores)) if m != y)
