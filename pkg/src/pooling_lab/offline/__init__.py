from .lp import LPSolution, hindsight_duals, integrality_report, lp_relaxation
from .marginal import MarginalReport, first_job_marginals, marginal_gain, marginal_loss, marginal_report
from .matching import EdgeSet, MatchingSolution, feasible_edges, opt_matching, solve_opt

__all__ = [
    "EdgeSet", "LPSolution", "MarginalReport", "MatchingSolution", "feasible_edges",
    "first_job_marginals", "hindsight_duals", "integrality_report", "lp_relaxation",
    "marginal_gain", "marginal_loss", "marginal_report", "opt_matching", "solve_opt",
]
