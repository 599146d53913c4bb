"""Exception hierarchy shared by every module."""


class QSwapTraceError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(QSwapTraceError, ValueError):
    pass


class InvalidState(QSwapTraceError, ValueError):
    """A state or moment vector violates a physical invariant."""


class ResourceLimit(QSwapTraceError):
    """The requested computation exceeds a configured size cap."""


class DivergenceError(QSwapTraceError, ArithmeticError):
    """A truncated series is being evaluated outside its convergence domain."""


class ConsistencyError(QSwapTraceError, ArithmeticError):
    """Internal cross-check failed (e.g. a probability far below zero)."""


class NumericInstabilityWarning(UserWarning):
    pass
