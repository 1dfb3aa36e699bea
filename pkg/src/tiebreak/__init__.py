"""Multivariate tie-breaker design optimization.

D-optimal treatment probabilities under budget, monotonicity and short-term
gain constraints, together with empirical and Gaussian closed-form
efficiency/gain evaluation.
"""
from __future__ import annotations

from .assignment import (
    AssignmentRule,
    probabilities_from_scores,
    quantile_cutoffs,
    rule_probabilities,
    sample_assignment,
    stratified_assignment,
)
from .curve import TradeoffCurve
from .errors import (
    ConfigError,
    HeterogeneousStratum,
    Infeasible,
    MaxIterations,
    NonConvergence,
    NonIntegerBudget,
    SchemaError,
    SingularInformation,
    TiebreakError,
    TooLarge,
    ZeroVariance,
)
from .evaluation import empirical_curve, empirical_gain, estimate_N, schur_log_det
from .gaussian import (
    GaussianPopulation,
    alpha_vector,
    expected_gain,
    gaussian_efficiency,
    gaussian_log_efficiency,
    middle_level_objective,
    normalized_tradeoff,
    optimal_directions,
)
from .kernels import BACKEND
from .model import (
    DesignProblem,
    InformationMatrix,
    augment_rows,
    criterion_gradient,
    expected_information,
    neg_log_det,
    realized_information,
)
from .projection import ConstraintSet, FeasibleSet, project_feasible
from .solver import (
    FeasibilityReport,
    SolverConfig,
    SolverReport,
    brute_force_optimum,
    check_feasibility,
    solve,
)

__version__ = "0.1.0"

_modules = {"assignment", "curve", "errors", "evaluation", "gaussian", "kernels", "model", "projection",
            "solver", "annotations"}
__all__ = sorted(n for n in dir() if not n.startswith("_") and n not in _modules)
