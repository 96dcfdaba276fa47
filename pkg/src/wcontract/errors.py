"""Exception types shared across the package."""

__all__ = [
    "InvalidParameterError",
    "DimensionMismatchError",
    "NumericError",
    "UnsupportedLikelihoodError",
    "DegenerateWeightsError",
    "GridLeakageError",
    "SizeLimitError",
    "UndefinedRatioError",
    "UnknownScenarioError",
]


class InvalidParameterError(ValueError):
    """Model or operation parameters violate a documented precondition."""


class DimensionMismatchError(ValueError):
    """Array shapes are inconsistent with the model dimensions."""


class NumericError(ArithmeticError):
    """A numerical operation failed (indefinite matrix, singular system, divergence)."""


class UnsupportedLikelihoodError(InvalidParameterError):
    """Operation requires a likelihood kind other than the one supplied."""


class DegenerateWeightsError(NumericError):
    """All particle weights underflowed to zero."""


class GridLeakageError(NumericError):
    """Probability mass leaked past the boundary of a quadrature grid."""


class SizeLimitError(InvalidParameterError):
    """Problem size exceeds a documented limit."""


class UndefinedRatioError(InvalidParameterError):
    """A ratio against a zero denominator was requested."""


class UnknownScenarioError(InvalidParameterError):
    """Experiment configuration names a scenario that does not exist."""
