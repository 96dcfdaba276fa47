"""Synchronous coupling of the conditioned signal process.

For linear-Gaussian observations the conditioning potential

    h(theta, t) = (P_{delta - t} phi)(theta),    phi = product of future
                                                 likelihood-weighted kernels

is an unnormalized Gaussian form, log h = -theta'J theta / 2 + b'theta + c.
The backward recursion alternates two exact operations on (J, b, c):
adding the observation quadratic, and pushing through the Gaussian
transition via

    J -> B' K B,  K = J (I + Sigma J)^{-1}
    b -> B' (G b - K a),  G = (I + J Sigma)^{-1}
    c -> c + b'(Sigma G b)/2 - logdet(I + Sigma J)/2 - a'K a/2 + (G b)'a,

which stays finite at sigma = 0 (then K = J, G = I).  The propagation
formula is gated by a quadrature validation test before anything else
relies on it.

Two drifted SDE copies driven by one Brownian path give the pathwise
contraction check: the separation at time t, divided by
exp(-int_0^t lambda(s) ds) times the initial separation, must stay at
1 + O(dt) along every path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidParameterError,
    NumericError,
    UndefinedRatioError,
    UnsupportedLikelihoodError,
)
from .likelihood import GAUSSIAN_LINEAR, LikelihoodModel, Observation
from .signal_model import DiscreteTransition, ModelParams, discretize

__all__ = [
    "BackwardQuadratic",
    "ContractionReport",
    "likelihood_quadratic",
    "propagate_quadratic",
    "backward_potential",
    "grad_log_h",
    "simulate_coupled",
    "simulate_coupled_paths",
    "pathwise_contraction_check",
]


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BackwardQuadratic:
    """Quadratic form of log h at one time stamp: -theta'J theta/2 + b'theta + c."""

    J: np.ndarray
    b: np.ndarray
    c: float
    valid_at: float

    def __post_init__(self):
        object.__setattr__(self, "J", _readonly(self.J))
        object.__setattr__(self, "b", _readonly(self.b))
        p = self.b.shape[0]
        if self.J.shape != (p, p):
            raise DimensionMismatchError("J must be square and match b")
        if np.abs(self.J - self.J.T).max() > 1e-12 * max(1.0, np.abs(self.J).max()):
            raise InvalidParameterError("J must be symmetric")

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def log_h(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(-0.5 * theta @ self.J @ theta + self.b @ theta + self.c)


def likelihood_quadratic(
    model: LikelihoodModel, obs: Observation
) -> tuple[np.ndarray, np.ndarray, float]:
    """(J, b, c) of log g for a gaussian_linear likelihood."""
    if model.kind != GAUSSIAN_LINEAR:
        raise UnsupportedLikelihoodError(
            f"quadratic potentials require gaussian_linear, got {model.kind}"
        )
    h, r, y = model.H, model.R, obs.value
    rinv_h = np.linalg.solve(r, h)
    j = h.T @ rinv_h
    b = rinv_h.T @ y
    n = h.shape[0]
    sign, logdet = np.linalg.slogdet(r)
    c = -0.5 * (y @ np.linalg.solve(r, y) + n * np.log(2 * np.pi) + logdet)
    return 0.5 * (j + j.T), b, float(c)


def propagate_quadratic(
    j: np.ndarray, b: np.ndarray, c: float, transition: DiscreteTransition
) -> tuple[np.ndarray, np.ndarray, float]:
    """Coefficients of log (P f) for log f = -v'Jv/2 + b'v + c."""
    p = b.shape[0]
    a, bmat, sig = transition.a, transition.B, transition.noise_cov
    m = np.eye(p) + sig @ j  # (I + Sigma J); (I + J Sigma) is its transpose
    try:
        k = np.linalg.solve(m.T, j.T).T  # J (I + Sigma J)^{-1}
        gb = np.linalg.solve(m.T, b)  # (I + J Sigma)^{-1} b
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular propagation system") from exc
    k = 0.5 * (k + k.T)
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise NumericError("propagation determinant not positive")
    c_new = c + 0.5 * b @ (sig @ gb) - 0.5 * logdet - 0.5 * a @ (k @ a) + gb @ a
    b_new = bmat.T @ (gb - k @ a)
    j_new = bmat.T @ k @ bmat
    return 0.5 * (j_new + j_new.T), b_new, float(c_new)


def _window(
    models: LikelihoodModel | Sequence[LikelihoodModel],
    observations: Sequence[Observation],
) -> list[tuple[LikelihoodModel, Observation]]:
    if isinstance(models, LikelihoodModel):
        models = [models] * len(observations)
    if len(models) != len(observations):
        raise DimensionMismatchError("one likelihood per observation required")
    for m in models:
        if m.kind != GAUSSIAN_LINEAR:
            raise UnsupportedLikelihoodError(
                f"quadratic potentials require gaussian_linear, got {m.kind}"
            )
    return list(zip(models, observations))


def backward_potential(
    params: ModelParams,
    models: LikelihoodModel | Sequence[LikelihoodModel],
    observations: Sequence[Observation],
    time_grid: np.ndarray | None = None,
) -> list[BackwardQuadratic]:
    """Quadratic h(., t) on a time grid over one inter-observation interval.

    The observation window is the future block j..k conditioned on; its
    combined potential is built backward (propagate through one full step,
    add the next quadratic), then evolved to each grid time t through the
    remaining horizon delta - t.
    """
    pairs = _window(models, observations)
    if not pairs:
        raise InvalidParameterError("need at least one observation in the window")
    if time_grid is None:
        time_grid = np.linspace(0.0, params.delta, 512)
    time_grid = np.asarray(time_grid, dtype=float)
    if time_grid.min() < 0 or time_grid.max() > params.delta * (1 + 1e-12):
        raise InvalidParameterError("time grid must lie in [0, delta]")

    full_step = discretize(params, params.delta)
    j, b, c = likelihood_quadratic(*pairs[-1])
    for model, obs in reversed(pairs[:-1]):
        j, b, c = propagate_quadratic(j, b, c, full_step)
        jg, bg, cg = likelihood_quadratic(model, obs)
        j, b, c = j + jg, b + bg, c + cg

    out = []
    for t in time_grid:
        remaining = params.delta - t
        if remaining <= 1e-14:
            out.append(BackwardQuadratic(J=j, b=b, c=c, valid_at=float(t)))
        else:
            tr = discretize(params, remaining)
            jt, bt, ct = propagate_quadratic(j, b, c, tr)
            out.append(BackwardQuadratic(J=jt, b=bt, c=ct, valid_at=float(t)))
    return out


def grad_log_h(potential: BackwardQuadratic, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != potential.dim:
        raise DimensionMismatchError("theta dimension does not match potential")
    return -theta @ potential.J.T + potential.b


def _interp_tables(
    potentials: Sequence[BackwardQuadratic], times: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    ts = np.array([q.valid_at for q in potentials])
    if not np.all(np.diff(ts) > 0):
        raise InvalidParameterError("potentials must be sorted by time stamp")
    js = np.stack([q.J for q in potentials])
    bs = np.stack([q.b for q in potentials])
    if len(potentials) == 1:
        n = times.shape[0]
        return np.repeat(js, n, axis=0), np.repeat(bs, n, axis=0)
    idx = np.clip(np.searchsorted(ts, times, side="right") - 1, 0, ts.size - 2)
    w = np.clip((times - ts[idx]) / (ts[idx + 1] - ts[idx]), 0.0, 1.0)
    j_t = js[idx] * (1 - w)[:, None, None] + js[idx + 1] * w[:, None, None]
    b_t = bs[idx] * (1 - w)[:, None] + bs[idx + 1] * w[:, None]
    return j_t, b_t


def simulate_coupled_paths(
    theta0s: np.ndarray,
    vartheta0s: np.ndarray,
    potentials: Sequence[BackwardQuadratic],
    params: ModelParams,
    dt: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama paths of the conditioned SDE for a batch of start pairs.

    Both members of each pair see the same Brownian increments.  Returns two
    arrays of shape (n_steps + 1, n_pairs, p); the time step is delta/n_steps
    with n_steps = round(delta/dt) and dt must be at most delta/100.
    """
    theta0s = np.atleast_2d(np.asarray(theta0s, dtype=float))
    vartheta0s = np.atleast_2d(np.asarray(vartheta0s, dtype=float))
    if theta0s.shape != vartheta0s.shape:
        raise DimensionMismatchError("start batches must have equal shapes")
    if dt <= 0 or dt > params.delta / 100 * (1 + 1e-9):
        raise InvalidParameterError("dt must be positive and at most delta/100")
    n_steps = int(round(params.delta / dt))
    step = params.delta / n_steps
    times = np.arange(n_steps) * step
    j_t, b_t = _interp_tables(potentials, times)

    rng = np.random.default_rng(seed)
    sig2 = params.sigma**2
    noise_scale = params.sigma * np.sqrt(step)
    n_pairs, p = theta0s.shape
    path_a = np.empty((n_steps + 1, n_pairs, p))
    path_b = np.empty((n_steps + 1, n_pairs, p))
    path_a[0] = theta0s
    path_b[0] = vartheta0s
    x, y = theta0s.copy(), vartheta0s.copy()
    for n in range(n_steps):
        z = rng.standard_normal((n_pairs, p))
        jn, bn = j_t[n], b_t[n]
        x = x + (params.alpha + x @ params.beta.T + sig2 * (bn - x @ jn.T)) * step
        x += noise_scale * z
        y = y + (params.alpha + y @ params.beta.T + sig2 * (bn - y @ jn.T)) * step
        y += noise_scale * z
        path_a[n + 1] = x
        path_b[n + 1] = y
    if not (np.all(np.isfinite(path_a)) and np.all(np.isfinite(path_b))):
        raise NumericError("coupled integration diverged")
    return path_a, path_b


def simulate_coupled(
    theta0: np.ndarray,
    vartheta0: np.ndarray,
    potentials: Sequence[BackwardQuadratic],
    params: ModelParams,
    dt: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Single coupled pair; returns two (n_steps + 1, p) paths."""
    a, b = simulate_coupled_paths(
        np.asarray(theta0, dtype=float)[None, :],
        np.asarray(vartheta0, dtype=float)[None, :],
        potentials,
        params,
        dt,
        seed,
    )
    return a[:, 0, :], b[:, 0, :]


@dataclass(frozen=True)
class ContractionReport:
    """Pathwise ratio of separation against the rate-integrated envelope."""

    max_ratio: float
    tolerance: float
    passed: bool
    ratios: np.ndarray


def pathwise_contraction_check(
    path_a: np.ndarray,
    path_b: np.ndarray,
    lambda_values: np.ndarray,
    dt: float,
    ratio_slack: float = 10.0,
) -> ContractionReport:
    """Check sup_t ||a_t - b_t|| / (exp(-int_0^t lambda) ||a_0 - b_0||) <= 1 + slack*dt.

    ``lambda_values`` holds lambda(t) on the same uniform time grid as the
    paths (n_steps + 1 entries); the envelope integral is trapezoid-based.
    """
    path_a = np.asarray(path_a, dtype=float)
    path_b = np.asarray(path_b, dtype=float)
    if path_a.shape != path_b.shape:
        raise DimensionMismatchError("paths must have equal shapes")
    lambda_values = np.asarray(lambda_values, dtype=float)
    if lambda_values.shape[0] != path_a.shape[0]:
        raise DimensionMismatchError("lambda grid must match the path grid")
    sep = np.linalg.norm(path_a - path_b, axis=-1)
    d0 = sep[0]
    if np.any(d0 == 0):
        raise UndefinedRatioError("initial separation is zero")
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (lambda_values[1:] + lambda_values[:-1]) * dt)]
    )
    envelope = np.exp(-cum)
    if sep.ndim == 1:
        ratios = sep / (envelope * d0)
    else:
        ratios = sep / (envelope[:, None] * d0[None, :])
    max_ratio = float(ratios.max())
    tol = 1.0 + ratio_slack * dt
    return ContractionReport(
        max_ratio=max_ratio, tolerance=tol, passed=max_ratio <= tol, ratios=ratios
    )
