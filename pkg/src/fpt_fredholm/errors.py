"""Exception types raised across the package."""


class FptError(Exception):
    """Base class for all package errors."""


class DomainError(FptError, ValueError):
    """Argument outside the mathematical domain (e.g. negative time)."""


class RangeError(FptError, ValueError):
    """Evaluation outside the tabulated range of a boundary."""


class ValidationError(FptError, ValueError):
    """Inputs violate a documented invariant or precondition."""


class KernelOverflowError(FptError, OverflowError):
    """Kernel exponent too large; the problem is mis-scaled."""


class TailBoundError(FptError, ValueError):
    """Tail bound requested outside its validity region."""


class QuadratureError(FptError, RuntimeError):
    """Composite quadrature failed to reach its tolerance."""

    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConvergenceError(FptError, RuntimeError):
    """Iterative solver stopped before converging."""

    def __init__(self, message, iterations=None, passive_set_size=None, residual_norm=None):
        super().__init__(message)
        self.iterations = iterations
        self.passive_set_size = passive_set_size
        self.residual_norm = residual_norm
