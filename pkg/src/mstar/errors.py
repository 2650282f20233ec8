"""Exception hierarchy.

Validation problems subclass ``ValueError``; numerical failures subclass
:class:`NumericError`. The CLI maps the former to exit code 1 and the latter
to exit code 2.
"""

from __future__ import annotations


class MstarError(Exception):
    """Base class for all package errors."""


class ValidationError(MstarError, ValueError):
    pass


class DimensionError(ValidationError):
    pass


class IngestionError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class InsufficientHistoryError(ValidationError):
    pass


class NumericError(MstarError, ArithmeticError):
    pass


class RankDeficiencyError(NumericError):
    """A least-squares subproblem has a (numerically) singular normal matrix."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class InvertibilityError(NumericError):
    pass


class NonStationaryError(NumericError):
    pass


class ConvergenceError(NumericError):
    pass


class DegenerateInputError(NumericError):
    pass


class GenerationError(NumericError):
    pass
