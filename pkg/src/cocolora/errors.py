"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class CocoLoraError(Exception):
    """Base class for all package errors."""


class ShapeError(CocoLoraError):
    """Operands have incompatible shapes; message names both shapes."""


class ConfigError(CocoLoraError):
    """Invalid or inconsistent run configuration."""


class DataError(CocoLoraError):
    """Malformed or inconsistent dataset content."""


class NumericError(CocoLoraError):
    """Non-finite value where a finite one is required.

    ``coordinate`` identifies the offending parameter index when the error
    came from a pointwise evaluation (e.g. a finite-difference probe).
    """

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class MetricError(CocoLoraError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
