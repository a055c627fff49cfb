"""Exception hierarchy shared by every module."""


class GibbskError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GibbskError, ValueError):
    """Malformed or inconsistent arguments."""


class DomainError(GibbskError, ValueError):
    """Arguments are well formed but outside the domain of the operation."""


class NumericError(GibbskError, ArithmeticError):
    """A numerical procedure failed (non-convergence, loss of definiteness)."""
