"""Convex subproblem solvers for counterfactual search."""

from ._types import INFEASIBLE, MAX_ITER, OPTIMAL, SolveOutcome, SolverConfig, DEFAULT_CONFIG
from .box import project_box
from .lp import solve_lp_l1
from .qcqp import solve_qcqp
from .qp import solve_qp, solve_quadratic

__all__ = [
    "DEFAULT_CONFIG",
    "INFEASIBLE",
    "MAX_ITER",
    "OPTIMAL",
    "SolveOutcome",
    "SolverConfig",
    "project_box",
    "solve_lp_l1",
    "solve_qcqp",
    "solve_qp",
    "solve_quadratic",
]
