"""Exception types shared across the package.

The CLI maps these to exit codes: ConfigError -> 2, DataError -> 3,
SolverError -> 4.
"""


class ConfigError(ValueError):
    """Invalid parameter, option, or config-file content."""


class DataError(ValueError):
    """Unusable data: parse failures, domain violations, missing events."""


class CsvParseError(DataError):
    """Malformed CSV content; carries the 1-based data row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class CapabilityError(ConfigError):
    """Request exceeds a deliberate size cap (diagnostics-only code paths)."""


class SolverError(RuntimeError):
    """Base class for numerical failures inside a fit."""


class NonFiniteError(SolverError):
    """Objective or gradient evaluated to a non-finite value."""


class LineSearchError(SolverError):
    """Majorization never held before the curvature cap was reached."""


class RankError(SolverError):
    """Singular (sub-)Hessian where an invertible one is required."""


class IterationLimitError(SolverError):
    """Iteration cap hit before convergence; carries the last iterate."""

    def __init__(self, message, last_beta=None):
        super().__init__(message)
        self.last_beta = last_beta


class UndefinedMetricError(ValueError):
    """Metric has an empty denominator (e.g. no usable pairs)."""
