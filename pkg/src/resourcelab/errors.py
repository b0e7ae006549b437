"""Exception hierarchy shared by all modules."""


class ResourceLabError(Exception):
    """Base class for library errors."""


class NonHermitianInput(ResourceLabError, ValueError):
    pass


class DomainError(ResourceLabError, ValueError):
    pass


class DimensionMismatch(ResourceLabError, ValueError):
    pass


class DimensionOverflow(ResourceLabError, ValueError):
    pass


class InvalidState(ResourceLabError, ValueError):
    pass


class InvalidParams(ResourceLabError, ValueError):
    pass


class SolverNotConverged(ResourceLabError, RuntimeError):
    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class UnsupportedFreeSet(ResourceLabError, TypeError):
    pass


class FreeInput(ResourceLabError, ValueError):
    """Raised when a robustness decomposition is requested for a free state."""


class ZeroProbability(ResourceLabError, ValueError):
    pass


class RateTooHigh(ResourceLabError, ValueError):
    pass


class FreeTarget(ResourceLabError, ValueError):
    pass


class InfeasibleStep(ResourceLabError, ValueError):
    """The weight required for resource non-generation exceeds one."""


class NoFeasibleRate(ResourceLabError, RuntimeError):
    pass
