"""Exception hierarchy for covnmf.

Every error carries the process exit code the command line maps it to, a short
stable ``code`` slug and a ``context`` dict that callers may enrich before
re-raising (cross-validation adds the grid cell and fold).
"""

from typing import Any


class CovNMFError(Exception):
    """Base class of all covnmf errors."""

    exit_code = 1
    code = "error"

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context: dict[str, Any] = dict(context)

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class ConfigurationError(CovNMFError, ValueError):
    """Invalid flag or parameter value."""

    exit_code = 2
    code = "configuration"


class IngestionError(CovNMFError):
    """Input file cannot be turned into a labeled matrix."""

    exit_code = 3
    code = "ingestion"


class DimensionError(CovNMFError, ValueError):
    """Operands do not have conforming shapes."""

    exit_code = 3
    code = "dimension"


class InvalidValueError(CovNMFError, ValueError):
    """Entries are non-finite, or negative where non-negativity is required."""

    exit_code = 3
    code = "invalid_value"


class NumericalError(CovNMFError):
    """A computation hit a degenerate or singular configuration."""

    exit_code = 4
    code = "numerical"


class DegenerateFeatureError(NumericalError):
    """A feature is constant and cannot be scaled."""

    code = "degenerate_feature"


class DegenerateBasisError(NumericalError):
    """A basis column collapsed to zero."""

    code = "degenerate_basis"

    def __init__(
        self, message: str, column: int, iteration: int, **context: Any
    ) -> None:
        super().__init__(message, column=column, iteration=iteration, **context)
        self.column = column
        self.iteration = iteration


class DegenerateCoefficientError(NumericalError):
    """An individual has an all-zero coefficient vector."""

    code = "degenerate_coefficient"


class DegenerateInputError(NumericalError):
    """The observations carry no signal to factorize."""

    code = "degenerate_input"


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is singular or ill-conditioned."""

    code = "singular"

    def __init__(self, message: str, factor: str, **context: Any) -> None:
        super().__init__(message, factor=factor, **context)
        self.factor = factor


class InsufficientDataError(NumericalError):
    """Too few individuals for the requested estimator."""

    code = "insufficient_data"


class UndefinedVarianceError(NumericalError):
    """Total variance is zero, so r-squared is undefined."""

    code = "undefined_variance"


class ConvergenceError(CovNMFError):
    """The optimizer stopped at the iteration cap while convergence was required."""

    exit_code = 5
    code = "not_converged"
