"""Exception types shared across the library."""


class IsaError(Exception):
    """Base class for all library-specific errors."""


class AllWeightsZero(IsaError):
    """Every raw log-weight is -inf: the proposal has no overlap with the
    target support and the weighted ensemble carries no information."""


class DegenerateEnsemble(IsaError):
    """The ensemble has collapsed (too few effective samples, or a
    covariance that cannot be repaired to positive definite)."""


class DomainError(IsaError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class EvaluationFailed(IsaError):
    """A finite-difference stencil could not be evaluated on either side."""


class EmptyInput(IsaError):
    """An operation received no usable input (e.g. no converged minima)."""


class InitializationFailed(IsaError):
    """Feasible walker start points could not be found within the draw budget."""


class ChainTooShort(IsaError):
    """The chain is too short (or degenerate) for autocorrelation estimation."""


class ConfigError(IsaError):
    """A run configuration file is missing, malformed, or out of range."""
