"""Bootstrap particle filter and a 1-D deterministic grid filter.

The particle filter works for any likelihood kind; all weight arithmetic is
in log space and resampling is systematic at every step.  One-dimensional
clouds are kept in value order, which makes each step invariant to the input
particle ordering at a fixed seed and keeps common-random-number runs of the
filter tightly coupled; higher-dimensional clouds stay index-aligned (see
``bootstrap_step``).  ``canonical_order`` provides the deterministic spatial
ordering (value order at p = 1, Morton order otherwise) used by the
order-invariance checks on the resampling stage.

The grid filter is a quadrature representation of the same recursion on a
fixed 1-D grid and serves as an oracle: trapezoid convolution with the exact
Gaussian transition kernel, then pointwise multiplication by the likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateWeightsError,
    DimensionMismatchError,
    GridLeakageError,
    InvalidParameterError,
)
from .likelihood import (
    CONSTANT,
    LOGISTIC_GLM,
    POISSON_GLM,
    LikelihoodModel,
    Observation,
    log_g_many,
)
from .signal_model import (
    DiscreteTransition,
    ModelParams,
    discretize,
    psd_factor,
    sample_step,
)

__all__ = [
    "ParticleCloud",
    "GridDensity",
    "GridKernel",
    "bootstrap_step",
    "pf_run",
    "split_factorized",
    "grid_filter_step",
    "grid_filter_run",
    "build_grid",
    "gaussian_grid",
    "normalize_grid",
    "grid_mean",
    "grid_var",
    "grid_quantiles",
    "log_trapz",
    "canonical_order",
    "systematic_resample",
    "dirac_sampler",
    "gaussian_sampler",
]

_LOG_FLOOR = 746.0  # exp(-746) underflows to 0 but the log stays finite


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ParticleCloud:
    """Equal-weight particle representation of a filter state at step k."""

    points: np.ndarray
    step: int

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(self.points))
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise InvalidParameterError("points must be (N >= 1, p)")
        if not np.all(np.isfinite(self.points)):
            raise InvalidParameterError("non-finite particle positions")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class GridDensity:
    """1-D density on a strictly increasing node grid, stored in log space."""

    nodes: np.ndarray
    log_values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(self.nodes))
        object.__setattr__(self, "log_values", _readonly(self.log_values))
        if self.nodes.ndim != 1 or self.nodes.shape != self.log_values.shape:
            raise DimensionMismatchError("nodes and log_values must be equal-length vectors")
        if not np.all(np.diff(self.nodes) > 0):
            raise InvalidParameterError("nodes must be strictly increasing")
        if not np.all(np.isfinite(self.log_values)):
            raise InvalidParameterError("log density values must be finite")


def _trapz_logw(nodes: np.ndarray) -> np.ndarray:
    d = np.diff(nodes)
    w = np.empty(nodes.shape[0])
    w[0] = d[0] / 2.0
    w[-1] = d[-1] / 2.0
    w[1:-1] = (d[:-1] + d[1:]) / 2.0
    return np.log(w)


def log_trapz(log_f: np.ndarray, nodes: np.ndarray) -> float:
    """log of the trapezoid integral of exp(log_f) over the node grid."""
    return float(logsumexp(log_f + _trapz_logw(nodes)))


def normalize_grid(density: GridDensity) -> GridDensity:
    total = log_trapz(density.log_values, density.nodes)
    if not np.isfinite(total):
        raise InvalidParameterError("grid density has zero or infinite total mass")
    log_values = density.log_values - total
    log_values = np.maximum(log_values, log_values.max() - _LOG_FLOOR)
    return GridDensity(nodes=density.nodes, log_values=log_values, normalized=True)


def gaussian_grid(nodes: np.ndarray, mean: float, std: float) -> GridDensity:
    if std <= 0:
        raise InvalidParameterError("std must be positive")
    logv = -0.5 * ((nodes - mean) / std) ** 2 - 0.5 * np.log(2 * np.pi * std**2)
    return normalize_grid(GridDensity(nodes=nodes, log_values=logv))


def grid_mean(density: GridDensity) -> float:
    w = np.exp(density.log_values - density.log_values.max())
    w_int = np.trapezoid(w, density.nodes)
    return float(np.trapezoid(w * density.nodes, density.nodes) / w_int)


def grid_var(density: GridDensity) -> float:
    m = grid_mean(density)
    w = np.exp(density.log_values - density.log_values.max())
    w_int = np.trapezoid(w, density.nodes)
    return float(np.trapezoid(w * (density.nodes - m) ** 2, density.nodes) / w_int)


def _grid_cdf(density: GridDensity) -> np.ndarray:
    f = np.exp(density.log_values)
    seg = 0.5 * (f[1:] + f[:-1]) * np.diff(density.nodes)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    return cdf / cdf[-1]

def grid_quantiles(density: GridDensity, u: np.ndarray) -> np.ndarray:
    """Invert the piecewise-linear CDF of a grid density at probabilities u."""
    cdf = _grid_cdf(density)
    nodes = density.nodes
    idx = np.clip(np.searchsorted(cdf, u, side="left"), 1, nodes.size - 1)
    lo, hi = cdf[idx - 1], cdf[idx]
    df = np.where(hi > lo, hi - lo, 1.0)
    frac = np.clip((u - lo) / df, 0.0, 1.0)
    return nodes[idx - 1] + frac * (nodes[idx] - nodes[idx - 1])


class GridKernel:
    """Precomputed transition kernel matrix for a 1-D grid.

    Stores row- and column-normalized exponentials of the log kernel so that
    repeated forward (measure) and backward (function) applications reduce to
    a matrix-vector product each.
    """

    def __init__(self, nodes: np.ndarray, transition: DiscreteTransition):
        if transition.dim != 1:
            raise InvalidParameterError("grid kernel is one-dimensional only")
        s2 = float(transition.noise_cov[0, 0])
        if s2 <= 0.0:
            raise InvalidParameterError("grid kernel requires sigma > 0")
        self.nodes = _readonly(nodes)
        self.transition = transition
        mean = transition.a[0] + transition.B[0, 0] * self.nodes
        log_k = (
            -0.5 * (self.nodes[:, None] - mean[None, :]) ** 2 / s2
            - 0.5 * np.log(2 * np.pi * s2)
        )
        self._rowmax = log_k.max(axis=1)
        self._colmax = log_k.max(axis=0)
        self._kf = np.exp(log_k - self._rowmax[:, None])
        self._kb = np.exp(log_k - self._colmax[None, :])
        self._logw = _trapz_logw(self.nodes)

    @classmethod
    def for_model(cls, params: ModelParams, nodes: np.ndarray) -> "GridKernel":
        return cls(nodes, discretize(params, params.delta))

    def forward_measure(self, log_density: np.ndarray) -> np.ndarray:
        """log of the one-step predicted density on the grid (unnormalized)."""
        s = log_density + self._logw
        m = s.max()
        v = self._kf @ np.exp(s - m)
        out = self._rowmax + m + np.log(np.maximum(v, np.finfo(float).tiny))
        return np.maximum(out, out.max() - _LOG_FLOOR)

    def backward_function(self, log_f: np.ndarray) -> np.ndarray:
        """log of (P_delta f)(theta) on the grid for f = exp(log_f)."""
        s = log_f + self._logw
        m = s.max()
        v = np.exp(s - m) @ self._kb
        out = self._colmax + m + np.log(np.maximum(v, np.finfo(float).tiny))
        return np.maximum(out, out.max() - _LOG_FLOOR)


def _boundary_leakage(log_density: np.ndarray, nodes: np.ndarray) -> float:
    logw = _trapz_logw(nodes)
    total = logsumexp(log_density + logw)
    edges = logsumexp(np.array([log_density[0] + logw[0], log_density[-1] + logw[-1]]))
    return float(np.exp(edges - total))


def grid_filter_step(
    density: GridDensity,
    transition: DiscreteTransition,
    model: LikelihoodModel,
    obs: Observation,
    kernel: GridKernel | None = None,
) -> GridDensity:
    """One predict-update cycle of the exact filter on the grid.

    Raises GridLeakageError when the predicted density carries more than 1e-6
    of its mass on the two boundary nodes, which signals a too-small domain.
    """
    if kernel is None:
        kernel = GridKernel(density.nodes, transition)
    predicted = kernel.forward_measure(density.log_values)
    if _boundary_leakage(predicted, density.nodes) > 1e-6:
        raise GridLeakageError("predicted density leaks past the grid boundary")
    weighted = predicted + log_g_many(model, density.nodes[:, None], obs)
    return normalize_grid(GridDensity(nodes=density.nodes, log_values=weighted))


def grid_filter_run(
    init: GridDensity,
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
    kernel: GridKernel | None = None,
) -> list[GridDensity]:
    """Grid filter sequence pi_0 .. pi_K (step-0 update applied first)."""
    if len(observations) == 0:
        raise InvalidParameterError("need at least the step-0 observation")
    if kernel is None:
        kernel = GridKernel.for_model(params, init.nodes)
    first = init.log_values + log_g_many(model, init.nodes[:, None], observations[0])
    densities = [normalize_grid(GridDensity(nodes=init.nodes, log_values=first))]
    for obs in observations[1:]:
        densities.append(
            grid_filter_step(densities[-1], kernel.transition, model, obs, kernel=kernel)
        )
    return densities


def build_grid(
    params: ModelParams,
    inits: Sequence[tuple[float, float]],
    n_steps: int,
    n_nodes: int = 4096,
    span: float = 8.0,
) -> np.ndarray:
    """Static grid covering the prior flow of every init (mean, std) pair.

    Moments are propagated through the exact transition without conditioning;
    the grid extends ``span`` predicted standard deviations past the extreme
    flow means over all steps.  Leakage is still monitored downstream.
    """
    if params.dim != 1:
        raise InvalidParameterError("grids are one-dimensional only")
    tr = discretize(params, params.delta)
    a, b, q = tr.a[0], tr.B[0, 0], tr.noise_cov[0, 0]
    lo, hi = np.inf, -np.inf
    for mean, std in inits:
        m, v = float(mean), float(std) ** 2
        for _ in range(n_steps + 1):
            s = np.sqrt(v) + 1e-12
            lo = min(lo, m - span * s)
            hi = max(hi, m + span * s)
            m = a + b * m
            v = b * b * v + q
    return np.linspace(lo, hi, n_nodes)


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Deterministic spatial ordering of a cloud (argsort at p=1, Morton else)."""
    n, p = points.shape
    if p == 1:
        return np.argsort(points[:, 0], kind="stable")
    lo = points.min(axis=0)
    rng = points.max(axis=0) - lo
    scale = np.where(rng > 0, rng, 1.0)
    n_bits = max(1, min(16, 62 // p))
    levels = np.uint64(2**n_bits - 1)
    q = ((points - lo) / scale * (2**n_bits - 1)).astype(np.uint64)
    q = np.minimum(q, levels)
    code = np.zeros(n, dtype=np.uint64)
    one = np.uint64(1)
    for bit in range(n_bits):
        for d in range(p):
            code |= ((q[:, d] >> np.uint64(bit)) & one) << np.uint64(bit * p + d)
    keys = tuple(points[:, d] for d in reversed(range(p))) + (code,)
    return np.lexsort(keys)


def systematic_resample(weights: np.ndarray, u0: float) -> np.ndarray:
    """Systematic resampling indices from normalized weights and one uniform."""
    n = weights.shape[0]
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    positions = (u0 + np.arange(n)) / n
    return np.clip(np.searchsorted(cum, positions, side="left"), 0, n - 1)


def _weight_and_resample(
    points: np.ndarray, log_w: np.ndarray, u0: float
) -> np.ndarray:
    total = logsumexp(log_w)
    if not np.isfinite(total):
        raise DegenerateWeightsError("all particle weights vanished")
    if points.shape[1] == 1:
        # value order makes the step order-free and keeps common-random-number
        # runs coupled: 1-D sorted pairing never amplifies pointwise gaps
        order = canonical_order(points)
        points = points[order]
        log_w = log_w[order]
    w = np.exp(log_w - total)
    w /= w.sum()
    return points[systematic_resample(w, u0)]


def bootstrap_step(
    cloud: ParticleCloud,
    transition: DiscreteTransition,
    model: LikelihoodModel,
    obs: Observation,
    rng: np.random.Generator,
) -> ParticleCloud:
    """Propagate, weight by the likelihood, and systematically resample.

    At p = 1 the cloud is put in value order before noise is drawn, so at a
    fixed seed the step depends on the particle multiset only.  At p >= 2 the
    index order is kept: per-cloud spatial sorting would re-pair the shared
    noise between common-random-number runs at the inter-particle spacing and
    put a floor under their coupling, while index alignment stays tight.
    """
    pts = cloud.points
    if cloud.dim == 1:
        pts = pts[canonical_order(pts)]
    propagated = sample_step(transition, pts, rng)
    log_w = log_g_many(model, propagated, obs)
    resampled = _weight_and_resample(propagated, log_w, rng.random())
    return ParticleCloud(points=resampled, step=cloud.step + 1)


def pf_run(
    init_sampler: Callable[[int, np.random.Generator], np.ndarray],
    params: ModelParams,
    model: LikelihoodModel,
    observations: Sequence[Observation],
    n_particles: int,
    seed: int,
) -> list[ParticleCloud]:
    """Bootstrap particle filter clouds at steps 0 .. K, deterministic in seed."""
    if n_particles < 1:
        raise InvalidParameterError("need at least one particle")
    if len(observations) == 0:
        raise InvalidParameterError("need at least the step-0 observation")
    rng = np.random.default_rng(seed)
    points = np.atleast_2d(np.asarray(init_sampler(n_particles, rng), dtype=float))
    if points.shape[0] != n_particles:
        raise DimensionMismatchError("init sampler returned wrong cloud size")
    log_w = log_g_many(model, points, observations[0])
    clouds = [ParticleCloud(points=_weight_and_resample(points, log_w, rng.random()), step=0)]
    transition = discretize(params, params.delta)
    for obs in observations[1:]:
        clouds.append(bootstrap_step(clouds[-1], transition, model, obs, rng))
    return clouds


def split_factorized(
    params: ModelParams, model: LikelihoodModel
) -> list[tuple[int, ModelParams, LikelihoodModel, np.ndarray]]:
    """Decompose a coordinatewise-factorized model into 1-D submodels.

    Requires a diagonal drift matrix and GLM covariate rows that each touch
    exactly one state coordinate (the tensor-product structure under which
    the contraction rate is dimension-free).  Returns one entry per
    coordinate: (coordinate, params, likelihood, observation row indices).
    """
    p = params.dim
    diag = np.diag(np.diag(params.beta))
    if not np.allclose(params.beta, diag, atol=1e-12):
        raise InvalidParameterError("factorized filtering needs a diagonal drift matrix")
    if model.kind == CONSTANT:
        rows_per_coord = [np.zeros(0, dtype=int)] * p
    elif model.kind in (LOGISTIC_GLM, POISSON_GLM):
        x = model.covariates
        if x.ndim != 2:
            raise InvalidParameterError("factorized filtering needs static covariates")
        nonzero = x != 0.0
        if np.any(nonzero.sum(axis=1) != 1):
            raise InvalidParameterError(
                "factorized filtering needs one nonzero covariate per observation row"
            )
        coord_of_row = nonzero.argmax(axis=1)
        rows_per_coord = [np.flatnonzero(coord_of_row == c) for c in range(p)]
    else:
        raise InvalidParameterError("factorized filtering supports GLM or constant kinds")
    out = []
    for c in range(p):
        sub_params = ModelParams(
            alpha=params.alpha[c : c + 1],
            beta=params.beta[c : c + 1, c : c + 1],
            sigma=params.sigma,
            delta=params.delta,
        )
        rows = rows_per_coord[c]
        if model.kind == CONSTANT or rows.size == 0:
            sub_model = LikelihoodModel.constant()
        else:
            sub_model = LikelihoodModel(
                kind=model.kind, covariates=model.covariates[rows][:, c : c + 1]
            )
        out.append((c, sub_params, sub_model, rows))
    return out


def dirac_sampler(point) -> Callable[[int, np.random.Generator], np.ndarray]:
    point = np.atleast_1d(np.asarray(point, dtype=float))

    def sampler(n: int, rng: np.random.Generator) -> np.ndarray:
        return np.tile(point, (n, 1))

    return sampler


def gaussian_sampler(mean, std) -> Callable[[int, np.random.Generator], np.ndarray]:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    std = float(std)

    def sampler(n: int, rng: np.random.Generator) -> np.ndarray:
        return mean[None, :] + std * rng.standard_normal((n, mean.shape[0]))

    return sampler
