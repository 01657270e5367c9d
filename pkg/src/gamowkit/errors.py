"""Exception hierarchy.

The three top-level families map onto CLI exit codes: validation (2),
domain (3) and numerical (4).
"""


class GamowkitError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class InvalidInputError(GamowkitError, ValueError):
    """Malformed or non-finite input, bad configuration."""

    exit_code = 2


class IncompatibleGridsError(InvalidInputError):
    pass


class UndefinedRatioError(InvalidInputError):
    """A relative quantity was requested of a zero-norm function."""


class CoverageError(InvalidInputError):
    pass


class InsufficientDataError(InvalidInputError):
    pass


class ParseError(InvalidInputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(InvalidInputError):
    pass


class DomainError(GamowkitError, ValueError):
    """Argument outside the mathematical domain of the operation."""

    exit_code = 3


class SemigroupDomainError(DomainError):
    """Time evolution requested for t < 0, where only the semigroup is defined."""

    def __init__(self, t, what="time evolution"):
        super().__init__(
            f"{what} is defined for t >= 0 only (semigroup domain); got t={t!r}"
        )
        self.t = t


class PoleEvaluationError(DomainError):
    pass


class NotAnObservableError(DomainError):
    pass


class NumericalError(GamowkitError, ArithmeticError):
    exit_code = 4


class FitFailureError(NumericalError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class RankDeficiencyError(NumericalError):
    pass
