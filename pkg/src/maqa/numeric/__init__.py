"""Solver kernels shared by the objective engines."""

from .ratio import RatioResult, TwoCostMdp, longrun_ratio_min, ratio_slack
from .reach import ReachPlan, mdp_reach
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, LpResult, SolverError, highs_solve, simplex_solve, solve_lp
from .ssp import DEFAULT_TOL, SspInstance, ValueVector, bellman, ssp_lp, ssp_value_iteration

__all__ = [
    "INFEASIBLE", "OPTIMAL", "UNBOUNDED", "DEFAULT_TOL",
    "LpProblem", "LpResult", "SolverError", "simplex_solve", "highs_solve", "solve_lp",
    "SspInstance", "ValueVector", "bellman", "ssp_value_iteration", "ssp_lp",
    "ReachPlan", "mdp_reach",
    "TwoCostMdp", "RatioResult", "longrun_ratio_min", "ratio_slack",
]
