"""Linear SDE signal model.

The signal is dX_t = (alpha + beta X_t) dt + sigma dB_t on R^p.  Over any
horizon t the transition is exactly Gaussian,

    X_t | X_0 = x  ~  N(a_t + B_t x, Sigma_t),

with B_t = exp(beta t), a_t = (int_0^t exp(beta s) ds) alpha and
Sigma_t = sigma^2 int_0^t exp(beta s) exp(beta^T s) ds.  Both integrals are
evaluated through augmented matrix exponentials (no hand-derived closed
forms), so the discretization is exact up to the accuracy of ``expm``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg as sla
from scipy.integrate import quad

from .errors import DimensionMismatchError, InvalidParameterError, NumericError

__all__ = [
    "ModelParams",
    "DiscreteTransition",
    "SpectralProfile",
    "discretize",
    "spectral",
    "tensor_double",
    "sample_step",
    "psd_factor",
]


def _expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential; scalar shortcut avoids expm overhead at p=1."""
    if m.shape == (1, 1):
        return np.array([[np.exp(m[0, 0])]])
    return sla.expm(m)


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Continuous-time signal parameters.

    Parameters
    ----------
    alpha : (p,) drift offset
    beta : (p, p) drift slope, units 1/time
    sigma : scalar diffusion coefficient, >= 0
    delta : inter-observation time, > 0
    """

    alpha: np.ndarray
    beta: np.ndarray
    sigma: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(self.alpha))
        object.__setattr__(self, "beta", _readonly(self.beta))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "delta", float(self.delta))
        if self.alpha.ndim != 1:
            raise InvalidParameterError("alpha must be a vector")
        p = self.alpha.shape[0]
        if self.beta.shape != (p, p):
            raise InvalidParameterError(
                f"beta must be {p}x{p} to match alpha, got {self.beta.shape}"
            )
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))):
            raise InvalidParameterError("non-finite entries in alpha or beta")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise InvalidParameterError("sigma must be finite and >= 0")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InvalidParameterError("delta must be finite and > 0")

    @property
    def dim(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class DiscreteTransition:
    """One-step Gaussian transition x' = a + B x + noise, noise ~ N(0, noise_cov)."""

    a: np.ndarray
    B: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _readonly(self.a))
        object.__setattr__(self, "B", _readonly(self.B))
        object.__setattr__(self, "noise_cov", _readonly(self.noise_cov))
        p = self.a.shape[0]
        if self.B.shape != (p, p) or self.noise_cov.shape != (p, p):
            raise DimensionMismatchError("transition blocks have inconsistent shapes")
        s = self.noise_cov
        scale = max(1.0, float(np.abs(s).max()))
        if np.abs(s - s.T).max() > 1e-12 * scale:
            raise InvalidParameterError("noise_cov is not symmetric")
        w = np.linalg.eigvalsh(0.5 * (s + s.T))
        if w.min() < -1e-12 * max(w.max(), 0.0) - 1e-300:
            raise InvalidParameterError("noise_cov has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return self.a.shape[0]


class SpectralProfile:
    """Spectral quantities of the drift matrix used by the contraction rates.

    ``lambda_sig`` is the smallest eigenvalue of -(beta + beta^T)/2.
    ``lambda_beta_min(t)`` / ``lambda_beta_max(t)`` are the extreme eigenvalues
    of exp(beta t) exp(beta t)^T, computed per query with a symmetric
    eigensolver.  ``capital_lambda(t)`` is sigma^2 int_0^t lambda_beta_max(s) ds
    by adaptive quadrature.
    """

    def __init__(self, beta: np.ndarray, sigma: float):
        self._beta = _readonly(beta)
        self._sigma = float(sigma)
        sym = -0.5 * (self._beta + self._beta.T)
        self.lambda_sig = float(np.linalg.eigvalsh(sym)[0])
        self._extremes = lru_cache(maxsize=65536)(self._extremes_uncached)

    def _extremes_uncached(self, t: float) -> tuple[float, float]:
        e = _expm(self._beta * t)
        w = np.linalg.eigvalsh(e @ e.T)
        return float(w[0]), float(w[-1])

    def lambda_beta_min(self, t: float) -> float:
        return self._extremes(float(t))[0]

    def lambda_beta_max(self, t: float) -> float:
        return self._extremes(float(t))[1]

    def capital_lambda(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        val, _ = quad(
            lambda s: self._extremes(float(s))[1],
            0.0,
            float(t),
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        return self._sigma**2 * val


def discretize(params: ModelParams, horizon: float) -> DiscreteTransition:
    """Exact Gaussian transition of the signal over the given horizon.

    B = exp(beta * horizon); the drift offset comes from the top-right block
    of exp([[beta, alpha], [0, 0]] * horizon); the noise covariance from the
    Van Loan augmented exponential of [[-beta, I], [0, beta^T]].
    """
    if not np.isfinite(horizon) or horizon <= 0:
        raise InvalidParameterError("horizon must be finite and > 0")
    p = params.dim
    B = _expm(params.beta * horizon)

    aug = np.zeros((p + 1, p + 1))
    aug[:p, :p] = params.beta
    aug[:p, p] = params.alpha
    a = _expm(aug * horizon)[:p, p]

    if params.sigma == 0.0:
        cov = np.zeros((p, p))
    else:
        vl = np.zeros((2 * p, 2 * p))
        vl[:p, :p] = -params.beta
        vl[:p, p:] = np.eye(p)
        vl[p:, p:] = params.beta.T
        g = _expm(vl * horizon)[:p, p:]
        cov = params.sigma**2 * (B @ g)
        cov = 0.5 * (cov + cov.T)
    return DiscreteTransition(a=a, B=B, noise_cov=cov)


def spectral(params: ModelParams) -> SpectralProfile:
    return SpectralProfile(params.beta, params.sigma)


def tensor_double(params: ModelParams) -> ModelParams:
    """Model for two independent copies of the signal: block diagonal drift."""
    return ModelParams(
        alpha=np.concatenate([params.alpha, params.alpha]),
        beta=sla.block_diag(params.beta, params.beta),
        sigma=params.sigma,
        delta=params.delta,
    )


def psd_factor(mat: np.ndarray) -> np.ndarray:
    """Factor L with L L^T = mat for symmetric positive-semidefinite mat.

    Eigenvalues below -1e-12 * lambda_max raise; small negatives from
    roundoff are clamped to zero, so sigma = 0 degeneracy is accepted.
    """
    sym = 0.5 * (mat + mat.T)
    w, v = np.linalg.eigh(sym)
    if w.min() < -1e-12 * max(w.max(), 0.0) - 1e-300:
        raise NumericError("matrix is indefinite, cannot factor")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_step(
    transition: DiscreteTransition, state: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw x' = a + B x + L z with L L^T = noise_cov and z standard normal.

    ``state`` may be a single (p,) vector or a batch of shape (n, p); the
    output matches the input shape.
    """
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != transition.dim:
        raise DimensionMismatchError(
            f"state dimension {state.shape[-1]} != transition dimension {transition.dim}"
        )
    factor = psd_factor(transition.noise_cov)
    z = rng.standard_normal(state.shape)
    return transition.a + state @ transition.B.T + z @ factor.T
