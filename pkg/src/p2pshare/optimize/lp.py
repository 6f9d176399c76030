"""Coverage-maximizing engagement program as a capacitated fractional b-matching.

The program is: maximize Σ_e γ_e subject to 0 ≤ γ_e ≤ cap and, per node, the
incident total stays within the node's capacity. On the bipartite double cover
(left copy L_i, right copy R_i) every undirected edge becomes two arcs; a
maximum flow there is exactly twice the optimum, and averaging the two arc
flows of an edge recovers a feasible optimal γ.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize as sopt

from ..netgen import Graph
from ..sharing import EngagementMap
from .flow import FlowNetwork

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LpProblem:
    graph: Graph
    gamma: float | np.ndarray
    s: float
    capacity: np.ndarray | None = None   # per-node residual capacities, default s

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("deductible must be nonnegative")
        if np.any(np.asarray(self.gamma) < 0):
            raise ValueError("edge cap must be nonnegative")
        if self.capacity is not None:
            c = np.asarray(self.capacity, dtype=float)
            if c.shape != (self.graph.n,):
                raise ValueError("capacity vector must have one entry per node")
            if np.any(c < -FEAS_TOL) or np.any(c > self.s + FEAS_TOL):
                raise ValueError("residual capacities must lie in [0, s]")

    def edge_caps(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.gamma, dtype=float), (self.graph.m,)).copy()

    def node_caps(self) -> np.ndarray:
        if self.capacity is None:
            return np.full(self.graph.n, float(self.s))
        return np.clip(np.asarray(self.capacity, dtype=float), 0.0, self.s)


def _double_cover(graph: Graph, caps_e: np.ndarray, caps_v: np.ndarray) -> FlowNetwork:
    n = graph.n
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    L = 1 + np.arange(n)
    R = 1 + n + np.arange(n)
    src, snk = 0, 2 * n + 1
    e_tail = np.empty(2 * graph.m, dtype=np.int64)
    e_head = np.empty(2 * graph.m, dtype=np.int64)
    e_tail[0::2], e_head[0::2] = L[u], R[v]
    e_tail[1::2], e_head[1::2] = L[v], R[u]
    tails = np.concatenate([np.full(n, src), R, e_tail])
    heads = np.concatenate([L, np.full(n, snk), e_head])
    caps = np.concatenate([caps_v, caps_v, np.repeat(caps_e, 2)])
    return FlowNetwork(2 * n + 2, tails, heads, caps)


def _flow_from_gamma(graph: Graph, gamma: np.ndarray) -> np.ndarray:
    cov = node_loads(graph, gamma)
    return np.concatenate([cov, cov, np.repeat(gamma, 2)])


def _gamma_from_flow(graph: Graph, flow: np.ndarray) -> np.ndarray:
    f = flow[2 * graph.n:]
    return 0.5 * (f[0::2] + f[1::2])


def node_loads(graph: Graph, gamma: np.ndarray) -> np.ndarray:
    e = graph.edges
    return (np.bincount(e[:, 0], gamma, minlength=graph.n)
            + np.bincount(e[:, 1], gamma, minlength=graph.n))


def lp_value(problem: LpProblem) -> float:
    """Optimal objective only (no tie-break)."""
    g = problem.graph
    if g.m == 0:
        return 0.0
    net = _double_cover(g, problem.edge_caps(), problem.node_caps())
    snk = 2 * g.n + 1
    val, _ = net.solve(0, snk)
    return val / 2.0


def _least_norm(graph: Graph, caps_e, caps_v, V, x0=None) -> np.ndarray:
    """Approximate argmin ½Σγ² over the optimal face {box, node caps, Σγ = V}.

    Works on the dual: γ_e = clip(μ - λ_u - λ_v, 0, cap_e) with λ ≥ 0. The
    iteration budget is bounded; the caller restores exact optimality.
    """
    n, m = graph.n, graph.m
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    scale = max(float(np.max(caps_e)), 1e-300)
    ce, cv, Vs = caps_e / scale, caps_v / scale, V / scale

    def negdual(z):
        lam, mu = z[:n], z[n]
        t = mu - lam[u] - lam[v]
        g = np.clip(t, 0.0, ce)
        val = 0.5 * g @ g - t @ g + mu * Vs - lam @ cv
        load = np.bincount(u, g, minlength=n) + np.bincount(v, g, minlength=n)
        grad = np.empty(n + 1)
        grad[:n] = cv - load
        grad[n] = g.sum() - Vs
        return -val, grad

    z0 = np.zeros(n + 1) if x0 is None else x0
    if x0 is None:
        z0[n] = 1.0
    bounds = [(0.0, None)] * n + [(0.0, None)]
    out = sopt.minimize(negdual, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                        options={"maxiter": 2000, "maxfun": 2500, "ftol": 1e-15,
                                 "gtol": 1e-11, "maxcor": 20})
    lam, mu = out.x[:n], out.x[n]
    return np.clip(mu - lam[u] - lam[v], 0.0, ce) * scale


def solve_engagement_lp(problem: LpProblem, tie_break: bool = True) -> EngagementMap:
    """Maximum-total engagements; among optima, the one closest to least Σγ²."""
    g = problem.graph
    caps_e, caps_v = problem.edge_caps(), problem.node_caps()
    if g.m == 0:
        return EngagementMap(g, np.zeros(0), {"objective": 0.0, "exact": True, "stage": 1})
    net = _double_cover(g, caps_e, caps_v)
    src, snk = 0, 2 * g.n + 1
    val2, flow = net.solve(src, snk)
    V = val2 / 2.0
    if tie_break and V > 0:
        gam = _least_norm(g, caps_e, caps_v, V)
        # restore feasibility, then let augmenting paths close the remaining gap
        load = node_loads(g, gam)
        f = np.where(load > caps_v, caps_v / np.where(load > 0, load, 1.0), 1.0)
        gam = np.minimum(gam * np.minimum(f[g.edges[:, 0]], f[g.edges[:, 1]]), caps_e)
        f0 = _flow_from_gamma(g, gam)
        _, flow = net.solve(src, snk, f0)
    gamma = np.clip(_gamma_from_flow(g, flow), 0.0, caps_e)
    load = node_loads(g, gamma)
    if np.any(load > caps_v + FEAS_TOL * max(1.0, problem.s)):
        raise ArithmeticError("LP solution violates a node capacity")
    obj = float(gamma.sum())
    logger.debug("LP on %d nodes / %d edges: objective %.12g (max-flow %.12g)", g.n, g.m, obj, V)
    return EngagementMap(g, gamma, {"objective": obj, "exact": True, "stage": 1})


def node_coverage(eng: EngagementMap, i: int) -> float:
    if not 0 <= i < eng.graph.n:
        raise IndexError(f"node {i} out of range")
    return float(eng.coverage[i])
