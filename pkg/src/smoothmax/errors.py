"""Exception hierarchy.

Every numeric failure raised by the package derives from :class:`NumericError`
so that batch drivers can map it to a single exit status.
"""


class SmoothmaxError(Exception):
    """Base class for all package errors."""


class ValidationError(SmoothmaxError, ValueError):
    """Malformed input: bad domain, bad law parameters, bad config."""


class NumericError(SmoothmaxError):
    """A computation could not produce a trustworthy number."""


class PointOutsideDomainError(ValidationError):
    pass


class NonGaussianSpecError(ValidationError):
    pass


class NoConvergenceError(NumericError):
    pass


class GridTooLargeError(ValidationError):
    pass


class DegenerateMaximumError(NumericError):
    """Maximum on the boundary or with a singular Hessian."""


class QuadratureError(NumericError):
    pass


class EffectiveSampleSizeError(NumericError):
    def __init__(self, message, ess=None, estimate=None):
        super().__init__(message)
        self.ess = ess
        self.estimate = estimate


class NotCenteredError(ValidationError):
    pass


class RangeError(ValidationError):
    """Argument outside the tabulated range of a Phi function."""


class NoCandidatePassesError(NumericError):
    pass


class InsufficientScalesError(NumericError):
    pass


class DegenerateFitError(NumericError):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


class ResolutionExhaustedError(NumericError):
    """A dyadic scale fell below what the finite point set can resolve."""
