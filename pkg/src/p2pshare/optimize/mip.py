"""Sparse engagement program: at most ``m`` edges may carry a nonzero magnitude."""

from __future__ import annotations

import logging

import numpy as np

from ..netgen import Graph
from ..sharing import EngagementMap
from .lp import LpProblem, lp_value, solve_engagement_lp

logger = logging.getLogger(__name__)

EXACT_EDGE_LIMIT = 24
NZ_TOL = 1e-9


def _restricted(problem: LpProblem, keep: np.ndarray) -> LpProblem:
    g = problem.graph
    sub = Graph.from_edges(g.n, g.edges[keep])
    caps = problem.edge_caps()[keep]
    return LpProblem(sub, caps, problem.s, problem.capacity)


def _lift(problem: LpProblem, keep: np.ndarray, sub_eng: EngagementMap) -> np.ndarray:
    gamma = np.zeros(problem.graph.m)
    gamma[np.flatnonzero(keep)] = sub_eng.gamma
    return gamma


def _support_value(problem: LpProblem, keep: np.ndarray) -> float:
    if not keep.any():
        return 0.0
    return lp_value(_restricted(problem, keep))


def _branch_and_bound(problem: LpProblem, m: int) -> np.ndarray:
    """Best support of size ≤ m by depth-first search over edges."""
    E = problem.graph.m
    caps = problem.edge_caps()
    best_val = -1.0
    best_keep = np.zeros(E, dtype=bool)
    cache: dict[bytes, float] = {}

    def value(mask):
        key = np.packbits(mask).tobytes()
        if key not in cache:
            cache[key] = _support_value(problem, mask)
        return cache[key]

    def visit(k: int, chosen: np.ndarray, n_chosen: int):
        nonlocal best_val, best_keep
        here = value(chosen)
        if here > best_val + NZ_TOL:
            best_val, best_keep = here, chosen.copy()
        if n_chosen == m or k == E:
            return
        open_ = chosen.copy()
        open_[k:] = True
        relax = value(open_)
        remaining = np.sort(caps[k:])[::-1][: m - n_chosen].sum()
        bound = min(relax, here + remaining)
        if bound <= best_val + NZ_TOL:
            return
        chosen[k] = True
        visit(k + 1, chosen, n_chosen + 1)
        chosen[k] = False
        visit(k + 1, chosen, n_chosen)

    visit(0, np.zeros(E, dtype=bool), 0)
    return best_keep


def _greedy(problem: LpProblem, m: int) -> np.ndarray:
    keep = np.ones(problem.graph.m, dtype=bool)
    while True:
        sub = solve_engagement_lp(_restricted(problem, keep))
        gamma = _lift(problem, keep, sub)
        nz = gamma > NZ_TOL
        keep &= nz
        if nz.sum() <= m:
            return keep
        # drop the smallest active edge, lowest index on ties
        idx = np.flatnonzero(keep)
        keep[idx[np.argmin(gamma[idx])]] = False


def solve_sparse_mip(problem: LpProblem, m: int) -> EngagementMap:
    """Maximize total engagement using at most ``m`` edges.

    Exact by branch and bound up to 24 edges, greedy pruning beyond that;
    ``info["exact"]`` says which.
    """
    if m < 0:
        raise ValueError("edge budget must be nonnegative")
    g = problem.graph
    full = solve_engagement_lp(problem)
    if int((full.gamma > NZ_TOL).sum()) <= m:
        return EngagementMap(g, full.gamma, {**full.info, "exact": True, "max_edges": m})
    if m == 0:
        return EngagementMap(g, np.zeros(g.m), {"objective": 0.0, "exact": True,
                                                "stage": 1, "max_edges": 0})
    exact = g.m <= EXACT_EDGE_LIMIT
    keep = _branch_and_bound(problem, m) if exact else _greedy(problem, m)
    sub = solve_engagement_lp(_restricted(problem, keep))
    gamma = _lift(problem, keep, sub)
    logger.debug("sparse program: %d of %d edges, exact=%s", int(keep.sum()), g.m, exact)
    return EngagementMap(g, gamma, {"objective": float(gamma.sum()), "exact": exact,
                                    "stage": 1, "max_edges": m})
