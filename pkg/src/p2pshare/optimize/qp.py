"""Minimum-variance linear sharing restricted to the network.

Node i keeps a share w_ii of its own loss and takes a share w_ij of each
friend's loss. With i.i.d. unit-variance losses the total variance is
Σ w_ii² + 2 Σ_edges w_ij², minimized under

* w_ii + Σ_j w_ij = 1 for every node (the loss is fully allocated),
* 0 ≤ w_ij ≤ γ / s on edges, 0 ≤ w_ii ≤ 1.

The cap binds edge shares only; self shares are exempt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize as sopt

from ..netgen import Graph


@dataclass(frozen=True)
class QpShares:
    graph: Graph
    self_share: np.ndarray
    edge_share: np.ndarray      # aligned with graph.edges
    objective: float
    cap: float

    def matrix(self) -> np.ndarray:
        """Dense n×n share matrix (small graphs only)."""
        n = self.graph.n
        W = np.diag(self.self_share.astype(float))
        u, v = self.graph.edges[:, 0], self.graph.edges[:, 1]
        W[u, v] = self.edge_share
        W[v, u] = self.edge_share
        return W


def qp_objective(self_share, edge_share) -> float:
    return float(self_share @ self_share + 2.0 * edge_share @ edge_share)


def solve_min_variance_qp(graph: Graph, s: float, gamma: float,
                          tol: float = 1e-12) -> QpShares:
    """Optimal shares via the smooth concave dual in one multiplier per node.

    For multipliers μ the inner minimizers are w_ii = clip(μ_i / 2, 0, 1) and
    w_ij = clip((μ_i + μ_j) / 4, 0, γ/s); the dual gradient is the allocation
    residual 1 - w_ii - Σ_j w_ij. A final repair makes every row sum exactly one.
    """
    if s <= 0 or gamma < 0:
        raise ValueError("need s > 0 and gamma >= 0")
    n, m = graph.n, graph.m
    c = gamma / s
    u, v = graph.edges[:, 0], graph.edges[:, 1]

    def inner(mu):
        wi = np.clip(0.5 * mu, 0.0, 1.0)
        we = np.clip(0.25 * (mu[u] + mu[v]), 0.0, c)
        return wi, we

    def negdual(mu):
        wi, we = inner(mu)
        load = np.bincount(u, we, minlength=n) + np.bincount(v, we, minlength=n)
        val = wi @ wi - mu @ wi + 2.0 * we @ we - (mu[u] + mu[v]) @ we + mu.sum()
        return -val, -(1.0 - wi - load)

    if m and c > 0:
        out = sopt.minimize(negdual, np.full(n, 2.0), jac=True, method="L-BFGS-B",
                            options={"maxiter": 50000, "ftol": tol, "gtol": 1e-12,
                                     "maxcor": 30})
        wi, we = inner(out.x)
        load = np.bincount(u, we, minlength=n) + np.bincount(v, we, minlength=n)
        f = np.where(load > 1.0, 1.0 / np.where(load > 0, load, 1.0), 1.0)
        we = we * np.minimum(f[u], f[v])
    else:
        we = np.zeros(m)
    load = np.bincount(u, we, minlength=n) + np.bincount(v, we, minlength=n)
    wi = np.clip(1.0 - load, 0.0, 1.0)
    return QpShares(graph, wi, we, qp_objective(wi, we), c)
