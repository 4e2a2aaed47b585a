"""
Exception hierarchy for the Boost-R toolkit.

Validation problems derive from ValueError so callers that only know the
standard library still catch them; numerical failures derive from
ArithmeticError and map to a different CLI exit status.
"""


class BoostRError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(BoostRError, ValueError):
    """A parameter or input violates a documented precondition."""


class GridMismatchError(InvalidArgumentError):
    """Two curves that must share a time grid do not."""


class DataFormatError(InvalidArgumentError):
    """A row of an input file is malformed or violates a data invariant."""

    def __init__(self, path, row, reason):
        self.path = str(path)
        self.row = row
        self.reason = reason
        where = "header" if row is None else f"row {row}"
        super().__init__(f"{self.path}: {where}: {reason}")


class DegenerateRangeError(InvalidArgumentError):
    """Spline samples do not span a positive range."""


class UnsupportedOperationError(InvalidArgumentError):
    """The operation is not defined for this model or dataset shape."""


class ModelFormatError(InvalidArgumentError):
    """A model document has an unknown or missing version tag."""


class UndefinedMetricError(BoostRError, ValueError):
    """A metric has no valid terms to average over."""


class NumericalError(BoostRError, ArithmeticError):
    """A numerical procedure failed."""


class BoundViolationError(NumericalError):
    """An intensity exceeded the envelope used for thinning."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance."""
