"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter or argument lies outside the domain of a formula."""


class NumericalIntegrityError(ArithmeticError):
    """A computed quantity is non-finite or violates a hard bound.

    Usually means the quadrature configuration is too coarse for the
    parameters at hand.
    """


class DataError(ValueError):
    """Malformed input file or table."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaVersionError(DataError):
    """A serialized artifact carries an unknown schema version."""


class DegenerateSeriesError(DataError):
    """A time series carries too little variation for the requested statistic."""


class DivergenceError(NumericalIntegrityError):
    """Training produced a non-finite loss."""
