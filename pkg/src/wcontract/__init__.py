"""Wasserstein contraction bounds for nonlinear filters, with verification tools."""

__version__ = "0.1.0"

from .signal_model import (
    DiscreteTransition,
    ModelParams,
    SpectralProfile,
    discretize,
    sample_step,
    spectral,
    tensor_double,
)
from .likelihood import LikelihoodModel, Observation, log_g, strong_logconcavity_parameter
from .rates import RateProfile, cumulative_bound, lambda_h, lambda_rate, step_exponent

__all__ = [
    "ModelParams",
    "DiscreteTransition",
    "SpectralProfile",
    "discretize",
    "spectral",
    "tensor_double",
    "sample_step",
    "LikelihoodModel",
    "Observation",
    "log_g",
    "strong_logconcavity_parameter",
    "RateProfile",
    "lambda_h",
    "lambda_rate",
    "step_exponent",
    "cumulative_bound",
]
