"""Equilibria of a subsidized two-stage spectrum-sharing market."""

__version__ = "0.1.0"

from .closed_form import (
    closed_form_solution,
    cubic_coefficients,
    fee_branches,
    optimum_fees,
    sorted_roots,
    subsidy_split,
    viete_roots,
)
from .config import ExperimentConfig, dump_config, load_config, parse_config
from .dynamics import ParameterRanges, monte_carlo, solve_equilibrium
from .exceptions import (
    BudgetViolationError,
    ComplexRootError,
    ConfigError,
    NonconvergenceError,
    NumericRegimeError,
    SingularDomainError,
    SubsidyMarketError,
    SweepFailureError,
)
from .foc import best_response_provider, profile_residuals, residuals_provider1, residuals_provider2
from .government import SweepResult, sweep
from .model import (
    ClosedFormSolution,
    EquilibriumResult,
    GovernmentPolicy,
    MarketConfig,
    StrategyProfile,
    choice_probabilities,
    customer_utility,
    general_provider_objective,
    outside_call_flows,
    outside_calls_served,
    provider_objective,
    social_welfare,
)

__all__ = [name for name in dir() if not name.startswith("_")]
