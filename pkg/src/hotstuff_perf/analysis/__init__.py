"""Closed forms, Markov models and exact oracles for the attack metrics."""

from .exact import (
    ENUMERATION_LIMIT,
    ExactResult,
    ExactUsageError,
    dp_expectations,
    enumerate_expectations,
    exact_finite_horizon,
)
from .markov import (
    HittingTimes,
    MarkovModel,
    hitting_times,
    hitting_times_closed_form,
    latency_by_composition,
    markov_model,
    stationary_closed_form,
)
from .theory import (
    THEORY,
    UnsupportedTheory,
    concentration_bound,
    theory_growth,
    theory_latency,
    theory_quality,
    theory_value,
)
from .table import theory_rows, write_theory_csv

__all__ = [
    "ENUMERATION_LIMIT",
    "ExactResult",
    "ExactUsageError",
    "HittingTimes",
    "MarkovModel",
    "THEORY",
    "UnsupportedTheory",
    "concentration_bound",
    "dp_expectations",
    "enumerate_expectations",
    "exact_finite_horizon",
    "hitting_times",
    "hitting_times_closed_form",
    "latency_by_composition",
    "markov_model",
    "stationary_closed_form",
    "theory_growth",
    "theory_latency",
    "theory_quality",
    "theory_rows",
    "theory_value",
    "write_theory_csv",
]
