"""Future-observation conditioning on 1-D grids.

Grid versions of the backward weights phi_{j,k} (the functions that
re-weight a filter to condition on observations j..k), the kernels they
induce, and the weighted Wasserstein distance W_{q,k} that compares filters
through their smoothing reweighting.  Everything here is quadrature on a
fixed grid, in log space, and serves as an oracle layer; the finite horizon
k stands in for an infinite future record, with a decay diagnostic
quantifying the truncation.

Normalization follows the convention phi_{j,k} = varphi_{j,k} / eta_j(varphi_{j,k}),
under which Q_j phi_{j,k} = varsigma_{j-1} phi_{j-1,k} holds exactly, where
Q_j(theta, dv) = g_{j-1}(theta) P_delta(theta, dv), eta_j is the one-step
predicted filter started from a reference init, and varsigma_j = eta_j(g_j).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParameterError, NumericError
from .likelihood import LikelihoodModel, Observation, log_g_many
from .particle import (
    GridDensity,
    GridKernel,
    _trapz_logw,
    grid_filter_run,
    normalize_grid,
)
from .signal_model import ModelParams, discretize
from .transport import wq_grid_1d

__all__ = [
    "BackwardWeight",
    "SmoothingState",
    "LogConcavityReport",
    "smoothing_state",
    "phi_backward",
    "eigen_residual",
    "logconcavity_check",
    "weighted_wasserstein",
    "r_kernel_compose",
    "matrix_identity_check",
    "v_weight",
    "horizon_decay",
]


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BackwardWeight:
    """Backward conditioning weight phi_{j,k} on a grid.

    ``log_phi`` holds the raw (unnormalized) log values; ``normalizer`` is
    eta_j(varphi_{j,k}), the reference-run normalization making the
    eigen-relation exact, with its log kept alongside for stability.
    """

    j: int
    k: int
    nodes: np.ndarray
    log_phi: np.ndarray
    normalizer: float | None = None
    log_normalizer: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(self.nodes))
        object.__setattr__(self, "log_phi", _readonly(self.log_phi))
        if self.j > self.k:
            raise InvalidParameterError("need j <= k")
        if not np.all(np.isfinite(self.log_phi)):
            raise InvalidParameterError("log_phi must be finite on the grid")

    def normalized_log_phi(self) -> np.ndarray:
        if self.log_normalizer is None:
            raise InvalidParameterError(
                "weight carries no normalizer; build it with a smoothing state"
            )
        return self.log_phi - self.log_normalizer


@dataclass(frozen=True)
class SmoothingState:
    """Reference-run quantities: predicted laws eta_k, constants varsigma_k."""

    eta_seq: tuple
    varsigma_seq: np.ndarray
    reference_init: GridDensity
    pi_seq: tuple

    def __post_init__(self):
        object.__setattr__(self, "varsigma_seq", _readonly(self.varsigma_seq))


def smoothing_state(
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
    mu0: GridDensity,
    kernel: GridKernel | None = None,
) -> SmoothingState:
    """Run the reference grid filter and collect eta_k and varsigma_k."""
    if kernel is None:
        kernel = GridKernel.for_model(params, mu0.nodes)
    logw = _trapz_logw(mu0.nodes)
    etas = [mu0]
    pis = []
    varsigma = np.empty(len(observations))
    current = mu0
    for k, obs in enumerate(observations):
        log_gk = log_g_many(model, current.nodes[:, None], obs)
        varsigma[k] = np.exp(logsumexp(current.log_values + log_gk + logw))
        pi = normalize_grid(
            GridDensity(nodes=current.nodes, log_values=current.log_values + log_gk)
        )
        pis.append(pi)
        if k + 1 < len(observations):
            predicted = kernel.forward_measure(pi.log_values)
            current = normalize_grid(GridDensity(nodes=mu0.nodes, log_values=predicted))
            etas.append(current)
    return SmoothingState(
        eta_seq=tuple(etas),
        varsigma_seq=varsigma,
        reference_init=mu0,
        pi_seq=tuple(pis),
    )


def phi_backward(
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
    j: int,
    k: int,
    nodes: np.ndarray,
    state: SmoothingState | None = None,
    kernel: GridKernel | None = None,
) -> BackwardWeight:
    """Backward weight phi_{j,k} = g_j * P_delta phi_{j+1,k} on the grid.

    ``observations`` is indexed by step, so observations[i] must be the step-i
    observation for j <= i <= k.  When a smoothing state is supplied the
    reference normalizer eta_j(varphi_{j,k}) is attached.
    """
    if not 0 <= j <= k:
        raise InvalidParameterError("need 0 <= j <= k")
    if k >= len(observations):
        raise InvalidParameterError("observations do not reach step k")
    if kernel is None:
        kernel = GridKernel.for_model(params, nodes)
    log_phi = log_g_many(model, nodes[:, None], observations[k])
    for i in range(k - 1, j - 1, -1):
        propagated = kernel.backward_function(log_phi)
        log_phi = log_g_many(model, nodes[:, None], observations[i]) + propagated
    normalizer = log_normalizer = None
    if state is not None:
        eta_j = state.eta_seq[j]
        log_normalizer = float(
            logsumexp(eta_j.log_values + log_phi + _trapz_logw(nodes))
        )
        normalizer = float(np.exp(log_normalizer))
    return BackwardWeight(
        j=j,
        k=k,
        nodes=nodes,
        log_phi=log_phi,
        normalizer=normalizer,
        log_normalizer=log_normalizer,
    )


def eigen_residual(
    state: SmoothingState,
    weight_jk: BackwardWeight,
    weight_prev: BackwardWeight,
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
    kernel: GridKernel | None = None,
) -> float:
    """sup over the grid of |Q_j phi_{j,k} - varsigma_{j-1} phi_{j-1,k}| / (1 + |phi_{j-1,k}|).

    Exact at finite horizon under the reference normalization, so the value
    reports pure quadrature error.
    """
    j = weight_jk.j
    if weight_prev.j != j - 1 or weight_prev.k != weight_jk.k:
        raise InvalidParameterError("weights must be consecutive in j at equal k")
    if kernel is None:
        kernel = GridKernel.for_model(params, weight_jk.nodes)
    log_q = kernel.backward_function(weight_jk.normalized_log_phi()) + log_g_many(
        model, weight_jk.nodes[:, None], observations[j - 1]
    )
    q_phi = np.exp(log_q)
    phi_prev = np.exp(weight_prev.normalized_log_phi())
    resid = np.abs(q_phi - state.varsigma_seq[j - 1] * phi_prev) / (1.0 + np.abs(phi_prev))
    return float(resid.max())


@dataclass(frozen=True)
class LogConcavityReport:
    max_second_difference: float
    tolerance: float
    passed: bool


def logconcavity_check(
    log_values: np.ndarray,
    nodes: np.ndarray,
    lambda_g: float = 0.0,
    tol: float = 1e-6,
) -> LogConcavityReport:
    """Discrete concavity of log f + lambda_g theta^2 / 2 on a uniform grid."""
    nodes = np.asarray(nodes, dtype=float)
    steps = np.diff(nodes)
    if np.abs(steps - steps[0]).max() > 1e-9 * steps[0]:
        raise InvalidParameterError("log-concavity check requires a uniform grid")
    f = np.asarray(log_values, dtype=float) + 0.5 * lambda_g * nodes**2
    second = f[2:] - 2.0 * f[1:-1] + f[:-2]
    worst = float(second.max())
    return LogConcavityReport(
        max_second_difference=worst, tolerance=tol, passed=worst <= tol
    )


def weighted_wasserstein(
    pi_a: GridDensity,
    pi_b: GridDensity,
    log_weight: np.ndarray,
    q: float = 2.0,
) -> float:
    """W_q between the two densities reweighted by a positive grid function."""
    log_weight = np.asarray(log_weight, dtype=float)
    if not np.all(np.isfinite(log_weight)):
        raise InvalidParameterError("weight must be strictly positive and finite")
    out = []
    for pi in (pi_a, pi_b):
        if not pi.normalized:
            raise InvalidParameterError("inputs must be normalized grid densities")
        reweighted = pi.log_values + log_weight
        if not np.isfinite(logsumexp(reweighted + _trapz_logw(pi.nodes))):
            raise InvalidParameterError("reweighted density has zero total mass")
        out.append(normalize_grid(GridDensity(nodes=pi.nodes, log_values=reweighted)))
    return wq_grid_1d(out[0], out[1], q)


def r_kernel_compose(
    weights: Sequence[BackwardWeight],
    theta: float,
    params: ModelParams,
    kernel: GridKernel | None = None,
) -> GridDensity:
    """Apply the weight-twisted kernels R_{1,k} .. R_{k,k} to a point mass.

    Each kernel R_{j,k}(u, dv) = P_delta(u, dv) phi_{j,k}(v) / (P_delta
    phi_{j,k})(u) carries a per-start-point normalizer, so one application is
    divide by (P_delta phi) pointwise, propagate, then multiply by phi.  The
    composition reproduces the filter law started at the point; constant
    rescalings of the weights cancel.
    """
    if not weights:
        raise InvalidParameterError("need at least one backward weight")
    nodes = weights[0].nodes
    if kernel is None:
        kernel = GridKernel.for_model(params, nodes)
    tr = discretize(params, params.delta)
    s2 = tr.noise_cov[0, 0]
    mean = tr.a[0] + tr.B[0, 0] * float(theta)
    log_density = -0.5 * (nodes - mean) ** 2 / s2 - 0.5 * np.log(2 * np.pi * s2)
    log_density = log_density + weights[0].log_phi
    current = normalize_grid(GridDensity(nodes=nodes, log_values=log_density))
    for w in weights[1:]:
        if w.nodes.shape != nodes.shape or w.nodes[0] != nodes[0]:
            raise InvalidParameterError("weights must share one grid")
        log_h = kernel.backward_function(w.log_phi)
        predicted = kernel.forward_measure(current.log_values - log_h)
        current = normalize_grid(
            GridDensity(nodes=nodes, log_values=predicted + w.log_phi)
        )
    return current


def matrix_identity_check(F, S, u, v) -> float:
    """Residual of the quadratic splitting identity used by the h-potential algebra.

    |v'Fv + (u-v)'S(u-v) - u'Cu - z'(F+S)z| with C = F (F+S)^{-1} S and
    z = v - (F+S)^{-1} S u.
    """
    F = np.asarray(F, dtype=float)
    S = np.asarray(S, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    total = F + S
    try:
        c = F @ np.linalg.solve(total, S)
        z = v - np.linalg.solve(total, S @ u)
    except np.linalg.LinAlgError as exc:
        raise NumericError("F + S is singular") from exc
    lhs = v @ F @ v + (u - v) @ S @ (u - v)
    rhs = u @ c @ u + z @ total @ z
    return float(abs(lhs - rhs))


def v_weight(nodes: np.ndarray, c: float = 1.0) -> np.ndarray:
    """Diagnostic weight V(theta) = 1 + c |theta|."""
    return 1.0 + c * np.abs(np.asarray(nodes, dtype=float))


def horizon_decay(
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
    j: int,
    horizons: Sequence[int],
    nodes: np.ndarray,
    state: SmoothingState,
    c: float = 1.0,
    kernel: GridKernel | None = None,
) -> np.ndarray:
    """e^{-V}-weighted sup differences of phi_{j,k} at successive horizons k.

    Output entry i is sup |phi_{j,h_i} - phi_{j,h_{i+1}}| e^{-V}; geometric
    decay along increasing horizons certifies that truncating the future
    record at the largest horizon is below tolerance.
    """
    horizons = list(horizons)
    if sorted(horizons) != horizons or len(horizons) < 2:
        raise InvalidParameterError("horizons must be increasing, length >= 2")
    if kernel is None:
        kernel = GridKernel.for_model(params, nodes)
    weight = np.exp(-v_weight(nodes, c))
    phis = [
        np.exp(
            phi_backward(
                params, model, observations, j, h, nodes, state=state, kernel=kernel
            ).normalized_log_phi()
        )
        for h in horizons
    ]
    return np.array(
        [np.max(np.abs(phis[i] - phis[i + 1]) * weight) for i in range(len(phis) - 1)]
    )
