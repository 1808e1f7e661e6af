"""Exception types shared across the package."""


class ConvexSamplerError(Exception):
    """Base class for all package errors."""


class CapabilityError(ConvexSamplerError):
    """The body does not expose the oracle that was requested."""


class A1Violation(ConvexSamplerError):
    """The body does not contain the unit ball around the origin."""


class BudgetExceeded(ConvexSamplerError):
    """The cutting-plane solver hit its iteration cap before certifying."""


class RejectionBudgetExceeded(ConvexSamplerError):
    """A rejection loop hit its hard cap."""


class InAndOutFailure(ConvexSamplerError):
    """The membership-only RGO exhausted its attempts (halt policy)."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InvalidConfig(ConvexSamplerError, ValueError):
    pass


class InsufficientChains(ConvexSamplerError, ValueError):
    pass
