"""Exception hierarchy shared by the library and the command line."""


class SpecShiftError(Exception):
    """Base class for all library errors."""


class ValidationError(SpecShiftError, ValueError):
    """Input does not satisfy the operator class or format contract."""


class ConvergenceError(SpecShiftError, ArithmeticError):
    """A numerical procedure failed to converge or became ambiguous."""


class BranchError(ConvergenceError):
    """Continuous branch tracking of a logarithm or argument failed."""


class PhaseTrackingError(ConvergenceError):
    """Eigenphase matching along a unitary path was ambiguous."""
