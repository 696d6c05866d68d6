"""Transformed principal-components estimation for dynamic panels with
interactive fixed effects."""

from ._core import (
    DataError,
    EstimateResult,
    NumericalError,
    eigenvalue_ratio,
    estimate,
    monte_carlo,
    nickell_bias,
    read_long_csv,
    simulate,
)

__all__ = [
    "DataError",
    "EstimateResult",
    "NumericalError",
    "eigenvalue_ratio",
    "estimate",
    "monte_carlo",
    "nickell_bias",
    "read_long_csv",
    "simulate",
]
