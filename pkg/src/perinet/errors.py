"""Exception hierarchy shared across the package."""


class PerinetError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PerinetError, ValueError):
    """Model, kernel or option values are inconsistent or out of range."""


class PreconditionError(PerinetError, ValueError):
    """An operation was called outside of the regime where it is defined."""


class NumericError(PerinetError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite output."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ParseError(PerinetError, ValueError):
    """Malformed input file."""


class DegenerateLossDifferential(PerinetError, ValueError):
    """The Diebold-Mariano statistic is undefined for this loss differential."""
