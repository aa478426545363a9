"""Exception types raised across the package."""

from __future__ import annotations


class IklError(Exception):
    """Base class for all package errors."""


class DivergentRow(IklError):
    """A coupling row sum is infinite."""


class DimensionMismatch(IklError, ValueError):
    """Vector lengths disagree with the truncation size."""


class WrongFamily(IklError, TypeError):
    """The operation is not defined for this coupling family."""


class ConfigError(IklError, ValueError):
    """Malformed scenario file: bad syntax, unknown key, wrong type."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(IklError, ValueError):
    """Scenario is well formed but physically inconsistent."""


class DegenerateTuple(IklError, ArithmeticError):
    """Two of the four cross-ratio points are closer than the gap floor."""


class NotConverged(IklError):
    """Classification requested on a run that never reached equilibrium."""


class HypothesisViolated(IklError, ValueError):
    """Inputs fall outside the hypotheses of the estimate being evaluated."""


class NoEntranceTime(IklError):
    """The phase diameter never entered the quarter arc within the run."""
