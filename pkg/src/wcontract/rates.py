"""Contraction-rate computations.

For observation step j with strong log-concavity parameter lambda_g(j), the
instantaneous rate on the inter-observation interval [0, delta] is

    lambda(j, t) = lambda_sig + sigma^2 * lambda_h(t),

    lambda_h(t) = lambda_g * lbmin(delta - t)
                  / (1 + sigma^2 * lambda_g * int_t^delta lbmax(delta - s) ds),

where lbmin/lbmax are the extreme eigenvalues of exp(beta t) exp(beta t)^T.
The cumulative bound factor after k steps is exp(-sum_{j<=k} int_0^delta
lambda(j, t) dt); it may exceed one when lambda_sig < 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidParameterError
from .signal_model import ModelParams, SpectralProfile, spectral

__all__ = [
    "RateProfile",
    "lambda_h",
    "lambda_rate",
    "step_exponent",
    "cumulative_bound",
    "lambda_rate_curve",
]


def _check_t(model: ModelParams, t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= model.delta * (1.0 + 1e-12):
        raise InvalidParameterError(f"t={t} outside [0, delta={model.delta}]")
    return min(t, model.delta)


def _lambda_h(profile: SpectralProfile, model: ModelParams, lambda_g: float, t: float) -> float:
    if lambda_g < 0:
        raise InvalidParameterError("lambda_g must be >= 0")
    if lambda_g == 0.0:
        return 0.0
    u = model.delta - t
    num = lambda_g * profile.lambda_beta_min(u)
    den = 1.0 + lambda_g * profile.capital_lambda(u)
    return num / den


def lambda_h(
    model: ModelParams,
    lambda_g: float,
    t: float,
    profile: SpectralProfile | None = None,
) -> float:
    """Strong log-concavity rate of the conditioned transition at time t in [0, delta]."""
    t = _check_t(model, t)
    if profile is None:
        profile = spectral(model)
    return _lambda_h(profile, model, lambda_g, t)


def lambda_rate(
    model: ModelParams,
    lambda_g: float,
    t: float,
    profile: SpectralProfile | None = None,
) -> float:
    """lambda(j, t) = lambda_sig + sigma^2 * lambda_h(t)."""
    t = _check_t(model, t)
    if profile is None:
        profile = spectral(model)
    return profile.lambda_sig + model.sigma**2 * _lambda_h(profile, model, lambda_g, t)


def step_exponent(
    model: ModelParams,
    lambda_g: float,
    profile: SpectralProfile | None = None,
) -> float:
    """int_0^delta lambda(j, t) dt by adaptive quadrature (abs tol < 1e-9)."""
    if lambda_g < 0:
        raise InvalidParameterError("lambda_g must be >= 0")
    if profile is None:
        profile = spectral(model)
    if lambda_g == 0.0:
        return profile.lambda_sig * model.delta
    val, _ = quad(
        lambda t: lambda_rate(model, lambda_g, t, profile=profile),
        0.0,
        model.delta,
        epsabs=1e-11,
        epsrel=1e-11,
        limit=200,
    )
    return float(val)


@dataclass(frozen=True)
class RateProfile:
    """Per-step rate exponents and their cumulative bound.

    ``per_step_exponent[i]`` is int_0^delta lambda(j, t) dt for j = i + 1 and
    ``cumulative_log_bound[i]`` its negated prefix sum; the bound factor after
    k observation steps is exp(cumulative_log_bound[k - 1]) (one for k = 0).
    """

    model: ModelParams
    lambda_g_seq: tuple
    per_step_exponent: np.ndarray
    cumulative_log_bound: np.ndarray

    def bound_factor(self, k: int) -> float:
        if k == 0:
            return 1.0
        return float(np.exp(self.cumulative_log_bound[k - 1]))

    def factors(self) -> np.ndarray:
        """Bound factors at k = 0 .. len(lambda_g_seq)."""
        return np.exp(np.concatenate([[0.0], self.cumulative_log_bound]))


def cumulative_bound(model: ModelParams, lambda_g_seq) -> RateProfile:
    """Rate profile for a sequence of per-step lambda_g values (j = 1 .. k)."""
    seq = tuple(float(v) for v in lambda_g_seq)
    if any(v < 0 for v in seq):
        raise InvalidParameterError("lambda_g values must be >= 0")
    profile = spectral(model)
    cache: dict[float, float] = {}
    per_step = np.empty(len(seq))
    for i, lg in enumerate(seq):
        if lg not in cache:
            cache[lg] = step_exponent(model, lg, profile=profile)
        per_step[i] = cache[lg]
    return RateProfile(
        model=model,
        lambda_g_seq=seq,
        per_step_exponent=per_step,
        cumulative_log_bound=-np.cumsum(per_step),
    )


def lambda_rate_curve(model: ModelParams, lambda_g: float, times: np.ndarray) -> np.ndarray:
    """lambda(j, t) evaluated on a dense grid of times in [0, delta].

    The inner integral is accumulated by trapezoid on a refined grid instead
    of per-point adaptive quadrature; intended for pathwise checks where the
    curve is integrated again and O(dt^2) accuracy suffices.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.zeros(0)
    if times.min() < -1e-12 or times.max() > model.delta * (1.0 + 1e-12):
        raise InvalidParameterError("times must lie in [0, delta]")
    profile = spectral(model)
    if lambda_g == 0.0:
        return np.full(times.shape, profile.lambda_sig)
    # fine grid in u = delta - t for the running integral of lambda_beta_max
    n_fine = max(4 * times.size, 512)
    u_fine = np.linspace(0.0, model.delta, n_fine + 1)
    lbmax = np.array([profile.lambda_beta_max(u) for u in u_fine])
    big_lambda = np.concatenate(
        [[0.0], np.cumsum(0.5 * (lbmax[1:] + lbmax[:-1]) * np.diff(u_fine))]
    )
    u = model.delta - times
    lam_int = model.sigma**2 * np.interp(u, u_fine, big_lambda)
    lbmin_u = np.array([profile.lambda_beta_min(v) for v in u])
    lam_h = lambda_g * lbmin_u / (1.0 + lambda_g * lam_int)
    return profile.lambda_sig + model.sigma**2 * lam_h
