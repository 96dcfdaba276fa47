"""Observation likelihood families.

Every supported family factors as g(theta) = exp(-lambda_g/2 * theta'theta)
times a log-concave function; ``strong_logconcavity_parameter`` returns the
largest lambda_g valid for that factorization (zero for the GLM kinds,
the smallest eigenvalue of H' R^-1 H for linear-Gaussian observations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.special import expit, gammaln

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    UnsupportedLikelihoodError,
)

__all__ = [
    "GAUSSIAN_LINEAR",
    "LOGISTIC_GLM",
    "POISSON_GLM",
    "CONSTANT",
    "LikelihoodModel",
    "Observation",
    "log_g",
    "log_g_many",
    "grad_log_g",
    "strong_logconcavity_parameter",
]

GAUSSIAN_LINEAR = "gaussian_linear"
LOGISTIC_GLM = "logistic_glm"
POISSON_GLM = "poisson_glm"
CONSTANT = "constant"

_KINDS = (GAUSSIAN_LINEAR, LOGISTIC_GLM, POISSON_GLM, CONSTANT)


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Observation:
    """Observation y_k at step k."""

    step: int
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", _readonly(np.atleast_1d(self.value)))


@dataclass(frozen=True)
class LikelihoodModel:
    """One observation density family.

    gaussian_linear : y ~ N(H theta, R)
    logistic_glm    : y_i ~ Bernoulli(sigmoid(x_i' theta)), covariate rows x_i
    poisson_glm     : y_i ~ Poisson(exp(x_i' theta)), canonical log link
    constant        : g == 1 (uninformative)

    ``covariates`` is either a static (n, p) matrix or a stacked (T, n, p)
    array giving per-step covariates.
    """

    kind: str
    H: np.ndarray | None = None
    R: np.ndarray | None = None
    covariates: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(f"unknown likelihood kind {self.kind!r}")
        if self.kind == GAUSSIAN_LINEAR:
            if self.H is None or self.R is None:
                raise InvalidParameterError("gaussian_linear requires H and R")
            object.__setattr__(self, "H", _readonly(self.H))
            object.__setattr__(self, "R", _readonly(self.R))
            n = self.H.shape[0]
            if self.H.ndim != 2 or self.R.shape != (n, n):
                raise DimensionMismatchError("H must be (n, p) and R (n, n)")
            if np.abs(self.R - self.R.T).max() > 1e-10 * max(1.0, np.abs(self.R).max()):
                raise InvalidParameterError("R must be symmetric")
            try:
                sla.cho_factor(self.R)
            except sla.LinAlgError as exc:
                raise InvalidParameterError("R must be positive definite") from exc
        elif self.kind in (LOGISTIC_GLM, POISSON_GLM):
            if self.covariates is None:
                raise InvalidParameterError(f"{self.kind} requires covariates")
            object.__setattr__(self, "covariates", _readonly(self.covariates))
            if self.covariates.ndim not in (2, 3):
                raise DimensionMismatchError("covariates must be (n, p) or (T, n, p)")

    @classmethod
    def gaussian(cls, H, R) -> "LikelihoodModel":
        return cls(kind=GAUSSIAN_LINEAR, H=H, R=R)

    @classmethod
    def logistic(cls, covariates) -> "LikelihoodModel":
        return cls(kind=LOGISTIC_GLM, covariates=covariates)

    @classmethod
    def poisson(cls, covariates) -> "LikelihoodModel":
        return cls(kind=POISSON_GLM, covariates=covariates)

    @classmethod
    def constant(cls) -> "LikelihoodModel":
        return cls(kind=CONSTANT)

    def covariates_at(self, step: int) -> np.ndarray:
        x = self.covariates
        if x.ndim == 2:
            return x
        if not 0 <= step < x.shape[0]:
            raise InvalidParameterError(f"no covariates stored for step {step}")
        return x[step]

    def obs_dim(self, step: int = 0) -> int:
        if self.kind == GAUSSIAN_LINEAR:
            return self.H.shape[0]
        if self.kind == CONSTANT:
            return 0
        return self.covariates_at(step).shape[0]

    def state_dim(self, step: int = 0) -> int | None:
        if self.kind == GAUSSIAN_LINEAR:
            return self.H.shape[1]
        if self.kind == CONSTANT:
            return None
        return self.covariates_at(step).shape[1]


def _check_dims(model: LikelihoodModel, theta: np.ndarray, obs: Observation) -> None:
    p = model.state_dim(obs.step)
    if p is not None and theta.shape[-1] != p:
        raise DimensionMismatchError(
            f"theta dimension {theta.shape[-1]} != likelihood state dimension {p}"
        )
    n = model.obs_dim(obs.step)
    if obs.value.shape[0] != n:
        raise DimensionMismatchError(
            f"observation dimension {obs.value.shape[0]} != likelihood obs dimension {n}"
        )


def log_g_many(model: LikelihoodModel, thetas: np.ndarray, obs: Observation) -> np.ndarray:
    """log g(theta_i, y) for a batch of states, shape (N, p) -> (N,)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    _check_dims(model, thetas, obs)
    y = obs.value
    if model.kind == CONSTANT:
        return np.zeros(thetas.shape[0])
    if model.kind == GAUSSIAN_LINEAR:
        n = model.H.shape[0]
        resid = y[None, :] - thetas @ model.H.T
        cho = sla.cho_factor(model.R)
        solved = sla.cho_solve(cho, resid.T).T
        logdet = 2.0 * np.sum(np.log(np.diag(cho[0])))
        quad = np.einsum("ij,ij->i", resid, solved)
        return -0.5 * (quad + n * np.log(2.0 * np.pi) + logdet)
    x = model.covariates_at(obs.step)
    z = thetas @ x.T
    if model.kind == LOGISTIC_GLM:
        return z @ y - np.logaddexp(0.0, z).sum(axis=1)
    # poisson, canonical log link
    return z @ y - np.exp(z).sum(axis=1) - gammaln(y + 1.0).sum()


def log_g(model: LikelihoodModel, theta: np.ndarray, obs: Observation) -> float:
    """Exact log observation density at a single state."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise DimensionMismatchError("theta must be a vector")
    return float(log_g_many(model, theta[None, :], obs)[0])


def grad_log_g(model: LikelihoodModel, theta: np.ndarray, obs: Observation) -> np.ndarray:
    """Analytic gradient of log g in theta."""
    theta = np.asarray(theta, dtype=float)
    _check_dims(model, theta[None, :], obs)
    y = obs.value
    if model.kind == CONSTANT:
        return np.zeros_like(theta)
    if model.kind == GAUSSIAN_LINEAR:
        resid = y - model.H @ theta
        return model.H.T @ sla.cho_solve(sla.cho_factor(model.R), resid)
    x = model.covariates_at(obs.step)
    z = x @ theta
    if model.kind == LOGISTIC_GLM:
        return x.T @ (y - expit(z))
    return x.T @ (y - np.exp(z))


def strong_logconcavity_parameter(model: LikelihoodModel) -> float:
    """Largest lambda_g in the strong log-concavity factorization of the kind."""
    if model.kind != GAUSSIAN_LINEAR:
        return 0.0
    m = model.H.T @ sla.cho_solve(sla.cho_factor(model.R), model.H)
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(max(w[0], 0.0))
