"""Exception types shared across the package."""


class AdaptiveLabError(Exception):
    """Base class for all package errors."""


class SingularSystem(AdaptiveLabError):
    """Unregularized solve requested on a numerically singular matrix."""


class NonConvergence(AdaptiveLabError):
    """Iterative scheme exhausted its iteration budget."""


class InvalidSpec(AdaptiveLabError):
    """Malformed feature-map or environment specification."""


class EmptyCandidates(AdaptiveLabError):
    """Policy asked to select from an empty candidate set."""


class DegenerateDof(AdaptiveLabError):
    """Residual degrees of freedom are non-positive."""


class IdentificationFailure(AdaptiveLabError):
    """Target direction has mass outside the range of the pooled design."""


class ZeroSignal(AdaptiveLabError):
    """Signal-direction projector undefined because the coefficient vector is zero."""


class NotUnitNorm(AdaptiveLabError):
    """Operation requires unit-norm features."""


class TooFewSamples(AdaptiveLabError):
    """Statistic requires more samples than provided."""


class ConfigError(AdaptiveLabError):
    """Invalid or unresolvable experiment configuration."""


class OutputIOError(AdaptiveLabError):
    """Failed to write experiment outputs."""
