"""Exception types shared across the library."""

from __future__ import annotations


class SubouError(Exception):
    """Base class for all library-specific errors."""


class ConvergenceError(SubouError):
    """A series evaluation could not certify the requested tolerance.

    Carries the best available error bound and the truncation order at
    which the evaluation gave up.
    """

    def __init__(self, message: str, bound: float | None = None,
                 order: int | None = None):
        super().__init__(message)
        self.bound = bound
        self.order = order


class DivergenceError(ConvergenceError):
    """Partial sums of an eigenfunction series show no decay at all."""


class QuadratureError(SubouError):
    """Numerical integration failed to reach its target accuracy."""

    def __init__(self, message: str, achieved_tol: float | None = None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class UnsupportedFamilyError(SubouError):
    """The requested operation is not available for this subordinator family."""


class BracketingError(SubouError):
    """A root could not be bracketed; carries the attainable value range."""

    def __init__(self, message: str,
                 attainable: tuple[float, float] | None = None):
        super().__init__(message)
        self.attainable = attainable


class PrecisionLimitError(SubouError):
    """Requested evaluation lies below the supported accuracy regime."""


class CalibrationError(SubouError):
    """A pricing invariant was violated while evaluating the fit objective."""


class ConfigError(SubouError):
    """A configuration or market file could not be parsed."""
