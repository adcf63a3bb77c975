"""Ranking scores from comparison data under generalized Bradley-Terry models."""

from .data import (
    ComparisonDataset,
    DesignSpec,
    Kind,
    ParseError,
    cooccurrence_matrix,
    largest_connected_component,
    parse_choice_csv,
    parse_pairwise_csv,
    parse_ranking_csv,
    synthesize,
)
from .models import GammaPrior, ModelSpec, evaluate, gradient, log_likelihood, outcome_probability
from .solvers import (
    AccelerationUnavailable,
    DivergenceSuspected,
    NonconvergentItem,
    SolverConfig,
    SolverResult,
    solve,
)
from .spectral import bound_report, laplacian_summary

__version__ = "0.1.0"
