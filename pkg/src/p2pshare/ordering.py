"""Convex order on finite distributions, share matrices, clique pooling, majorization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class OrderError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteDist:
    """Finite distribution with sorted, merged, strictly positive atoms."""

    values: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteDist":
        atoms = list(atoms.items()) if isinstance(atoms, dict) else list(atoms)
        v = np.array([float(a) for a, _ in atoms])
        p = np.array([float(b) for _, b in atoms])
        if len(v) == 0:
            raise OrderError("distribution needs at least one atom")
        if not np.all(np.isfinite(v)) or np.any(p < 0):
            raise OrderError("values must be finite and probabilities nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise OrderError(f"probabilities sum to {p.sum()!r}, not 1")
        uv, inv = np.unique(v, return_inverse=True)
        up = np.bincount(inv, p)
        keep = up > 0
        return cls(uv[keep], up[keep])

    @classmethod
    def point(cls, c: float) -> "DiscreteDist":
        return cls(np.array([float(c)]), np.array([1.0]))

    @property
    def mean(self) -> float:
        return float(self.values @ self.probs)

    @property
    def var(self) -> float:
        return float(((self.values - self.mean) ** 2) @ self.probs)

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))


def stop_loss(dist: DiscreteDist, t) -> float | np.ndarray:
    """E[(X - t)+]; ``t`` may be an array."""
    t_arr = np.asarray(t, dtype=float)
    out = np.maximum(dist.values[None, :] - t_arr.reshape(-1, 1), 0.0) @ dist.probs
    return float(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


def convex_order_compare(X: DiscreteDist, Y: DiscreteDist, tol: float = 1e-12) -> str:
    """One of ``equal``, ``X_below``, ``Y_below``, ``incomparable``, ``means_differ``."""
    if abs(X.mean - Y.mean) > tol:
        return "means_differ"
    # both transforms are piecewise linear with kinks only at atoms
    grid = np.union1d(X.values, Y.values)
    sx, sy = stop_loss(X, grid), stop_loss(Y, grid)
    x_le = bool(np.all(sx <= sy + tol))
    y_le = bool(np.all(sy <= sx + tol))
    if x_le and y_le:
        return "equal"
    if x_le:
        return "X_below"
    if y_le:
        return "Y_below"
    return "incomparable"


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise OrderError("share matrix must be square")
    if np.any(M < 0):
        raise OrderError("share matrix has negative entries")
    return M


def classify_matrix(M, tol: float = 1e-9) -> str:
    M = _as_matrix(M)
    cols = np.all(np.abs(M.sum(axis=0) - 1.0) <= tol)
    rows = np.all(np.abs(M.sum(axis=1) - 1.0) <= tol)
    if cols and rows:
        return "doubly_stochastic"
    if cols:
        return "column_stochastic"
    return "neither"


def apply_share(M, X, tol: float = 1e-9) -> np.ndarray:
    """ξ = M X; columns of M must each sum to one."""
    M = _as_matrix(M)
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != M.shape[1]:
        raise OrderError("loss vector length does not match the matrix")
    if np.any(np.abs(M.sum(axis=0) - 1.0) > tol):
        raise OrderError("column sums differ from one; total loss would not be preserved")
    return X @ M.T


def clique_share_matrix(sizes) -> np.ndarray:
    """Block-diagonal averaging matrix, one block per clique."""
    sizes = [int(k) for k in sizes]
    if not sizes or min(sizes) < 1:
        raise OrderError("clique sizes must be positive")
    n = sum(sizes)
    M = np.zeros((n, n))
    start = 0
    for k in sizes:
        M[start:start + k, start:start + k] = 1.0 / k
        start += k
    return M


def clique_pool_variance(n: int, sizes, varX: float) -> float:
    """Closed form ``varX * sum(1/size) / n`` for a clique partition.

    Equals ``varX / (k (n - k))`` for two cliques and ``varX (j/n)^2`` for j equal
    ones. This is not ``trace_variance(clique_share_matrix(sizes), varX I) / n``:
    a node in a clique of size k carries ``varX / k``, so that average is
    ``varX * len(sizes) / n``.
    """
    sizes = [int(k) for k in sizes]
    if sum(sizes) != n or min(sizes) < 1:
        raise OrderError("sizes must be a partition of n")
    return varX * sum(1.0 / k for k in sizes) / n


def trace_variance(M, Sigma, psd_tol: float = 1e-10) -> float:
    """trace(M Σ Mᵀ), the summed variance of ξ = M X when Cov[X] = Σ."""
    M = np.asarray(M, dtype=float)
    S = np.asarray(Sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or M.shape[1] != S.shape[0]:
        raise OrderError("shape mismatch between matrix and covariance")
    if not np.allclose(S, S.T, atol=psd_tol):
        raise OrderError("covariance must be symmetric")
    if np.linalg.eigvalsh(S).min() < -psd_tol * max(1.0, np.abs(S).max()):
        raise OrderError("covariance must be positive semidefinite")
    return float(np.trace(M @ S @ M.T))


def majorizes(x, y, tol: float = 1e-9) -> bool:
    """True when x ⪯ y: equal totals and ascending prefix sums of x never exceed those of y.

    Note the ascending convention: the more spread-out vector is the *smaller*
    one, e.g. ``majorizes((3, 2, 2, 1), (2, 2, 2, 2))`` holds. This is the
    reverse of the usual Hardy-Littlewood-Pólya orientation.
    """
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise OrderError("vectors must have equal length")
    if abs(x.sum() - y.sum()) > tol:
        return False
    return bool(np.all(np.cumsum(x) <= np.cumsum(y) + tol))


MAX_ENUM_VARS = 4
MAX_ENUM_ATOMS = 5


def share_marginals(M, dists) -> list[DiscreteDist]:
    """Exact marginal laws of (M X)_i for independent finite X_j.

    Refuses beyond four variables or five atoms each instead of approximating.
    """
    M = _as_matrix(M)
    n = M.shape[0]
    if len(dists) != n:
        raise OrderError("need one distribution per coordinate")
    if n > MAX_ENUM_VARS or any(len(d.values) > MAX_ENUM_ATOMS for d in dists):
        raise OrderError("exact enumeration limited to 4 variables with 5 atoms each")
    vals, probs = [], []
    for combo in itertools.product(*(range(len(d.values)) for d in dists)):
        x = np.array([d.values[k] for d, k in zip(dists, combo)])
        vals.append(M @ x)
        probs.append(np.prod([d.probs[k] for d, k in zip(dists, combo)]))
    vals = np.array(vals)
    probs = np.array(probs)
    probs = probs / probs.sum()
    # merge atoms that only differ by rounding noise
    return [DiscreteDist.from_atoms(zip(np.round(vals[:, i], 12), probs)) for i in range(n)]
