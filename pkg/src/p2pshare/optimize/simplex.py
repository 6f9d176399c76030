"""Dense tableau simplex for ``max c·x, A x ≤ b, x ≥ 0`` with ``b ≥ 0``.

Small and slow on purpose: it is the cross-check for the flow-based solver,
so it shares no code with it. Bland's rule prevents cycling.
"""

from __future__ import annotations

import numpy as np


def simplex_max(c, A, b, tol: float = 1e-10, max_iter: int = 100_000):
    """Return ``(value, x)``. Raises if the problem is unbounded."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < -tol):
        raise ValueError("origin must be feasible (b >= 0)")
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = np.maximum(b, 0.0)
    T[m, :n] = -c
    basis = list(range(n, n + m))
    for _ in range(max_iter):
        entering = next((j for j in range(n + m) if T[m, j] < -tol), None)
        if entering is None:
            break
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > tol]
        if not rows:
            raise ArithmeticError("LP is unbounded")
        ratios = [T[i, -1] / col[i] for i in rows]
        best = min(ratios)
        leave = min((basis[i], i) for i, r in zip(rows, ratios) if r <= best + tol)[1]
        T[leave] /= T[leave, entering]
        for i in range(m + 1):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
    else:
        raise ArithmeticError("simplex iteration limit reached")
    x = np.zeros(n + m)
    x[basis] = T[:m, -1]
    return float(T[m, -1]), x[:n]


def engagement_lp_dense(n: int, edges, gamma: float, s: float):
    """Same program as the flow solver, written as an explicit dense LP."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    A = np.zeros((n + m, m))
    for k, (u, v) in enumerate(edges):
        A[u, k] = A[v, k] = 1.0
        A[n + k, k] = 1.0
    b = np.concatenate([np.full(n, float(s)), np.full(m, float(gamma))])
    return simplex_max(np.ones(m), A, b)
