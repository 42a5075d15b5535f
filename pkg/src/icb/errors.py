"""Error taxonomy shared by every module.

DomainError covers mathematically meaningful failures (exit code 1 at the
CLI); UsageError covers malformed requests (exit code 2).
"""


class IcbError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(IcbError):
    """Malformed request: bad flags, mismatched rings, invalid config."""


class DomainError(IcbError):
    """Mathematically meaningful failure during a valid request."""


class ExactDivisionError(DomainError):
    """An exact division was required but the divisor does not divide."""


class PairingUndefinedError(DomainError):
    """The left pairing has no defined value for the requested word."""


class RecursionViolatedError(DomainError):
    """The defining recursion produced an inconsistent system.

    Indicates an implementation fault: existence of the solved operator is
    guaranteed, so the triangular solve can only fail through a bug.
    """


class DegenerateSystemError(DomainError):
    """A linear system expected to be solvable turned out degenerate."""


class InsufficientOrderError(DomainError):
    """The requested computation needs a higher truncation order."""
