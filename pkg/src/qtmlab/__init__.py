"""Numerical laboratory for collective choice through quadratic transfers.

Softmax selection over m alternatives, quadratic vote costs with budget
balancing rebates, symmetric equilibrium computation from the first order
conditions, and empirical checks of outcome efficiency and concentration.
"""

__version__ = "0.1.0"

from .diagnostics import (DiagnosticsConfig, DiagnosticsReport, efficiency_report,
                          extremes_check, lemma1_check, plurality_baseline, run_diagnostics,
                          simulate_profiles, theorem1_check, vote_bounds_check)
from .errors import ConfigError, ConvergenceError, VoteBoxError
from .mechanism import (PayoffBreakdown, ProblemSpec, check_votes, payoff, select_probs,
                        select_probs_given_own_vote, selection_derivatives, tally,
                        vote_box_bound)
from .oracle import (OracleConfig, oracle_best_response, oracle_equilibrium,
                     oracle_expected_utility, oracle_outcome_distribution)
from .preferences import (BeliefProfile, Beta, Discrete, IndependentMarginals, PointMass,
                          Uniform, risk_adjusted_values, summarize, validate_distribution)
from .solver import (EquilibriumResult, LinearStrategy, SolverConfig, TabularStrategy,
                     best_response, build_field, estimate_rjk, solve_equilibrium,
                     solve_with_beliefs)
from .util import stable_seed

__all__ = [
    "__version__",
    "BeliefProfile", "Beta", "ConfigError", "ConvergenceError", "DiagnosticsConfig",
    "DiagnosticsReport", "Discrete", "EquilibriumResult", "IndependentMarginals",
    "LinearStrategy", "OracleConfig", "PayoffBreakdown", "PointMass", "ProblemSpec",
    "SolverConfig", "TabularStrategy", "Uniform", "VoteBoxError",
    "best_response", "build_field", "check_votes", "efficiency_report", "estimate_rjk",
    "extremes_check", "lemma1_check", "oracle_best_response", "oracle_equilibrium",
    "oracle_expected_utility", "oracle_outcome_distribution", "payoff",
    "plurality_baseline", "risk_adjusted_values", "run_diagnostics", "select_probs",
    "select_probs_given_own_vote", "selection_derivatives", "simulate_profiles",
    "solve_equilibrium", "solve_with_beliefs", "stable_seed", "summarize", "tally",
    "theorem1_check", "validate_distribution", "vote_box_bound", "vote_bounds_check",
]
