"""Empirical Wasserstein distances.

Clouds are equal-weight, equal-size point sets (the post-resampling particle
representation), so optimal transport reduces to an assignment problem:
sorted coupling in one dimension, Hungarian assignment in general, and a
sliced average over random projections as the scalable surrogate for large
clouds in higher dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, InvalidParameterError, SizeLimitError
from .particle import GridDensity, grid_quantiles

__all__ = [
    "TransportPlan",
    "wq_1d",
    "wq_exact",
    "sliced_wq",

    "wq_grid_1d",
    "wq_cloud_grid_1d",
    "EXACT_SIZE_LIMIT",
]

EXACT_SIZE_LIMIT = 2048


@dataclass(frozen=True)
class TransportPlan:
    """Optimal assignment between two equal-size clouds and its W_q cost."""

    assignment: np.ndarray
    cost: float


def _check_q(q: float) -> float:
    q = float(q)
    if q < 1.0:
        raise InvalidParameterError("order q must be >= 1")
    return q


def wq_1d(samples_a, samples_b, q: float = 1.0) -> float:
    """W_q between two equal-size 1-D samples via the monotone coupling."""
    q = _check_q(q)
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.shape != b.shape:
        raise DimensionMismatchError("sample lengths differ")
    return float(np.mean(np.abs(a - b) ** q) ** (1.0 / q))


def wq_exact(cloud_a, cloud_b, q: float = 2.0) -> TransportPlan:
    """Optimal W_q assignment by the Hungarian algorithm; N limited to 2048."""
    q = _check_q(q)
    a = np.atleast_2d(np.asarray(cloud_a, dtype=float))
    b = np.atleast_2d(np.asarray(cloud_b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatchError("clouds must have equal size and dimension")
    n = a.shape[0]
    if n > EXACT_SIZE_LIMIT:
        raise SizeLimitError(f"exact assignment limited to N <= {EXACT_SIZE_LIMIT}")
    cost = cdist(a, b) ** q
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(n, dtype=int)
    assignment[rows] = cols
    total = cost[rows, cols].sum()
    return TransportPlan(assignment=assignment, cost=float((total / n) ** (1.0 / q)))


def sliced_wq(
    cloud_a,
    cloud_b,
    q: float = 1.0,
    n_projections: int = 64,
    seed: int = 0,
    directions: np.ndarray | None = None,
) -> float:
    """Average 1-D W_q over random projection directions (seed-deterministic).

    A lower bound on W_q; intended as a scalable diagnostic when exact
    assignment is out of reach.
    """
    q = _check_q(q)
    a = np.atleast_2d(np.asarray(cloud_a, dtype=float))
    b = np.atleast_2d(np.asarray(cloud_b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatchError("clouds must have equal size and dimension")
    p = a.shape[1]
    if directions is None:
        rng = np.random.default_rng(seed)
        directions = rng.standard_normal((n_projections, p))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    proj_a = np.sort(a @ directions.T, axis=0)
    proj_b = np.sort(b @ directions.T, axis=0)
    per_dir = np.mean(np.abs(proj_a - proj_b) ** q, axis=0) ** (1.0 / q)
    return float(per_dir.mean())


def wq_grid_1d(f: GridDensity, g: GridDensity, q: float = 2.0, n_quantiles: int = 10_000) -> float:
    """W_q between two normalized 1-D grid densities by quantile coupling."""
    q = _check_q(q)
    if not (f.normalized and g.normalized):
        raise InvalidParameterError("grid densities must be normalized")
    u = (np.arange(n_quantiles) + 0.5) / n_quantiles
    qf = grid_quantiles(f, u)
    qg = grid_quantiles(g, u)
    return float(np.mean(np.abs(qf - qg) ** q) ** (1.0 / q))


def wq_cloud_grid_1d(points, density: GridDensity, q: float = 1.0) -> float:
    """W_q between an equal-weight 1-D cloud and a normalized grid density."""
    q = _check_q(q)
    pts = np.asarray(points, dtype=float).ravel()
    if not density.normalized:
        raise InvalidParameterError("grid density must be normalized")
    u = (np.arange(pts.size) + 0.5) / pts.size
    return float(np.mean(np.abs(np.sort(pts) - grid_quantiles(density, u)) ** q) ** (1.0 / q))
