"""Rough-volatility VIX option pricing, surrogate training and calibration."""

from .errors import (
    DataError,
    DomainError,
    NumericalIntegrityError,
)
from .params import STANDARD_MATURITIES, REFERENCE_PARAMS, ModelParams

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DomainError",
    "ModelParams",
    "NumericalIntegrityError",
    "STANDARD_MATURITIES",
    "REFERENCE_PARAMS",
    "__version__",
]
