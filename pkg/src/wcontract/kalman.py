"""Exact filtering for linear-Gaussian observations.

Beliefs are Gaussian; prediction pushes them through the exact SDE
transition and the update is the conjugate Bayes step in Joseph form.
Covariances never depend on observed values, so the order-2 Wasserstein
distance between two runs with equal initial covariances reduces to the
distance between their means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NumericError,
    UnsupportedLikelihoodError,
)
from .likelihood import GAUSSIAN_LINEAR, CONSTANT, LikelihoodModel, Observation
from .signal_model import DiscreteTransition, ModelParams, discretize

__all__ = ["GaussianBelief", "predict", "update", "gaussian_w2", "filter_run"]


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian filter state; a Dirac mass is represented by zero covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(self.mean))
        object.__setattr__(self, "cov", _readonly(self.cov))
        p = self.mean.shape[0]
        if self.mean.ndim != 1 or self.cov.shape != (p, p):
            raise DimensionMismatchError("mean must be (p,) and cov (p, p)")
        scale = max(1.0, float(np.abs(self.cov).max()))
        if np.abs(self.cov - self.cov.T).max() > 1e-12 * scale:
            raise InvalidParameterError("covariance is not symmetric")
        w = np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T))
        if w.min() < -1e-10 * max(w.max(), 0.0) - 1e-300:
            raise InvalidParameterError("covariance has a negative eigenvalue")

    @classmethod
    def dirac(cls, point) -> "GaussianBelief":
        point = np.asarray(point, dtype=float)
        return cls(mean=point, cov=np.zeros((point.shape[0], point.shape[0])))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def predict(belief: GaussianBelief, transition: DiscreteTransition) -> GaussianBelief:
    """Push the belief through one exact signal transition."""
    if belief.dim != transition.dim:
        raise DimensionMismatchError("belief and transition dimensions differ")
    mean = transition.a + transition.B @ belief.mean
    cov = transition.B @ belief.cov @ transition.B.T + transition.noise_cov
    return GaussianBelief(mean=mean, cov=0.5 * (cov + cov.T))


def update(
    belief: GaussianBelief, model: LikelihoodModel, obs: Observation
) -> GaussianBelief:
    """Conjugate Bayes update for a gaussian_linear likelihood, Joseph form."""
    if model.kind == CONSTANT:
        return belief
    if model.kind != GAUSSIAN_LINEAR:
        raise UnsupportedLikelihoodError(
            f"exact update requires gaussian_linear, got {model.kind}"
        )
    h, r = model.H, model.R
    if h.shape[1] != belief.dim:
        raise DimensionMismatchError("H columns must match belief dimension")
    s = h @ belief.cov @ h.T + r
    try:
        cho = sla.cho_factor(0.5 * (s + s.T))
    except sla.LinAlgError as exc:
        raise NumericError("singular innovation covariance") from exc
    gain = sla.cho_solve(cho, h @ belief.cov).T
    mean = belief.mean + gain @ (obs.value - h @ belief.mean)
    ikh = np.eye(belief.dim) - gain @ h
    cov = ikh @ belief.cov @ ikh.T + gain @ r @ gain.T
    return GaussianBelief(mean=mean, cov=0.5 * (cov + cov.T))


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def gaussian_w2(b1: GaussianBelief, b2: GaussianBelief) -> float:
    """Order-2 Wasserstein distance between two Gaussian laws (Bures form).

    Equal covariance arrays short-circuit to the mean distance: the Bures
    term is exactly zero there, while evaluating it through eigensolvers
    would leave O(sqrt(eps)) noise.
    """
    if b1.dim != b2.dim:
        raise DimensionMismatchError("beliefs have different dimensions")
    dm = b1.mean - b2.mean
    if np.array_equal(b1.cov, b2.cov):
        return float(np.linalg.norm(dm))
    s2h = _sqrtm_psd(b2.cov)
    cross = _sqrtm_psd(s2h @ b1.cov @ s2h)
    bures = np.trace(b1.cov) + np.trace(b2.cov) - 2.0 * np.trace(cross)
    return float(np.sqrt(max(dm @ dm + bures, 0.0)))


def filter_run(
    init: GaussianBelief,
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
) -> list[GaussianBelief]:
    """Exact filter sequence pi_0 .. pi_K.

    The incoming belief is the time-zero prior; the step-0 observation is
    assimilated before any prediction, then each later step is
    predict-then-update over one inter-observation interval.
    """
    if len(observations) == 0:
        raise InvalidParameterError("need at least the step-0 observation")
    transition = discretize(params, params.delta)
    beliefs = [update(init, model, observations[0])]
    for obs in observations[1:]:
        beliefs.append(update(predict(beliefs[-1], transition), model, obs))
    return beliefs
