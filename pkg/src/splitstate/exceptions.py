"""Exception and warning types raised across the package."""


class SizeLimitError(ValueError):
    """Requested enumeration exceeds the supported problem size."""


class ValidationError(ValueError):
    """Input data violates a structural invariant (Hermiticity, shape, ...)."""


class PreconditionError(ValueError):
    """Input is well-formed but unsuitable for the requested operation."""


class UndefinedPhaseError(ValueError):
    """Phase of a zero-magnitude element was requested."""


class FactorizationError(ValueError):
    """Overlap matrix cannot be written as a Gram matrix of the requested rank."""


class DesignInfeasibleError(RuntimeError):
    """Every optimization start ended on a singular measurement matrix."""


class UnphysicalStateWarning(UserWarning):
    """State is not positive semidefinite."""


class RankWarning(UserWarning):
    """Measurement matrix is rank deficient; the result is least squares only."""
