"""L2-regularized linear hinge SVM trained by dual coordinate descent.

Binary problems are ``min_w  lam/2 ||w||^2 + C * sum_i max(0, 1 - s_i w'x_i)``;
multi-class uses one-vs-rest. Sweeps visit rows in fixed index order so
training is deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _dual_cd(x, s, alpha, w, upper, tol, max_epochs):
    n, p = x.shape
    qd = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += x[i, j] * x[i, j]
        qd[i] = acc
    epochs = 0
    for epoch in range(max_epochs):
        epochs = epoch + 1
        pg_max = -np.inf
        pg_min = np.inf
        for i in range(n):
            if qd[i] <= 0.0:
                continue
            wx = 0.0
            for j in range(p):
                wx += w[j] * x[i, j]
            g = s[i] * wx - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= upper:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if abs(pg) > 1e-12:
                new = min(max(a - g / qd[i], 0.0), upper)
                step = (new - a) * s[i]
                alpha[i] = new
                for j in range(p):
                    w[j] += step * x[i, j]
        if pg_max - pg_min < tol:
            break
    return epochs


def train_binary(x, s, c=1.0, strength=1.0, alpha=None, tol=1e-3, max_epochs=200):
    """Train one binary classifier; returns ``(w, alpha)``.

    ``s`` holds +1/-1 labels. Passing the previous ``alpha`` warm-starts the
    solver. ``x`` should already carry the constant column if an intercept is
    wanted (it is regularized like every other weight).
    """
    x = np.ascontiguousarray(x, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    upper = c / strength
    if alpha is None:
        alpha = np.zeros(x.shape[0])
    else:
        alpha = np.clip(np.array(alpha, dtype=float), 0.0, upper)
    w = (alpha * s) @ x if x.shape[0] else np.zeros(x.shape[1])
    w = np.ascontiguousarray(w, dtype=float)
    _dual_cd(x, s, alpha, w, upper, tol, max_epochs)
    return w, alpha


def train_ovr(x, y, n_classes, c=1.0, strength=1.0, alpha=None, tol=1e-3, max_epochs=200):
    """One-vs-rest training; returns ``(W, alpha)`` with ``W`` of shape ``M x p``.

    ``alpha`` is an ``n x M`` array of dual variables, updated in place order
    class by class.
    """
    y = np.asarray(y)
    n = x.shape[0]
    if alpha is None:
        alpha = np.zeros((n, n_classes))
    w = np.zeros((n_classes, x.shape[1]))
    for m in range(n_classes):
        s = np.where(y == m, 1.0, -1.0)
        w[m], alpha[:, m] = train_binary(x, s, c, strength, alpha[:, m], tol, max_epochs)
    return w, alpha
