"""Friends first, then friends of friends for nodes left under-covered."""

from __future__ import annotations

import numpy as np

from ..netgen import Graph, friends_of_friends
from ..sharing import EngagementMap
from .lp import LpProblem, solve_engagement_lp

COVER_TOL = 1e-9


def solve_two_stage(graph: Graph, s: float, gamma1: float, gamma2: float,
                    z: float = 0.0) -> tuple[EngagementMap, Graph, EngagementMap]:
    """Stage 1 on the friendship graph; stage 2 on the friends-of-friends graph
    of the nodes whose stage-1 coverage stays below ``s - z``, each limited to its
    leftover capacity.
    """
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("caps must be nonnegative")
    if not 0 <= z <= s:
        raise ValueError("self contribution outside [0, s]")
    budget = s - z
    eng1 = solve_engagement_lp(LpProblem(graph, gamma1, budget))
    eligible = np.flatnonzero(eng1.coverage < budget - COVER_TOL * max(1.0, s))
    fof = friends_of_friends(graph, eligible)
    if fof.m == 0 or gamma2 == 0:
        eng2 = EngagementMap(fof, np.zeros(fof.m), {"objective": 0.0, "exact": True, "stage": 2})
        return eng1, fof, eng2
    residual = np.clip(budget - eng1.coverage, 0.0, budget)
    out = solve_engagement_lp(LpProblem(fof, gamma2, budget, residual))
    eng2 = EngagementMap(fof, out.gamma, {**out.info, "stage": 2})
    return eng1, fof, eng2
