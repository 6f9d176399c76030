"""Engagement optimizers: coverage LP, sparse variant, minimum-variance QP, two-stage."""

from .lp import LpProblem, lp_value, node_coverage, solve_engagement_lp
from .mip import solve_sparse_mip
from .qp import QpShares, qp_objective, solve_min_variance_qp
from .twostage import solve_two_stage

__all__ = [
    "LpProblem", "lp_value", "node_coverage", "solve_engagement_lp",
    "solve_sparse_mip", "QpShares", "qp_objective", "solve_min_variance_qp",
    "solve_two_stage",
]
