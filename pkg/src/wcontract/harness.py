"""Experiment harness: configs, scenario runners, and report emission.

Each scenario compares an empirically computed distance column against the
rate-bound column and flags per-step passes; reports are written as CSV
(columns k, distance, bound, ratio, pass) and JSON (rows plus metadata).
Runs are fully deterministic given (config, seed): replicate randomness is
derived from spawned seed sequences and aggregation is order-independent.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy

from . import __version__
from .errors import InvalidParameterError, UnknownScenarioError
from .kalman import GaussianBelief, filter_run, gaussian_w2
from .likelihood import (
    CONSTANT,
    GAUSSIAN_LINEAR,
    LOGISTIC_GLM,
    POISSON_GLM,
    LikelihoodModel,
    Observation,
    strong_logconcavity_parameter,
)
from .particle import (
    GridKernel,
    build_grid,
    coupled_pair_run,
    dirac_sampler,
    gaussian_grid,
    grid_filter_run,
    pf_run,
)
from .rates import cumulative_bound, lambda_rate_curve, step_exponent
from .signal_model import ModelParams, discretize, sample_step, spectral, tensor_double
from .smoothing import horizon_decay, phi_backward, smoothing_state, weighted_wasserstein
from .transport import sliced_wq_weighted, wq_1d
from .coupling import backward_potential, pathwise_contraction_check, simulate_coupled_paths

__all__ = [
    "SCENARIOS",
    "THREADS_ENV_VAR",
    "ExperimentConfig",
    "ExperimentReport",
    "ReportRow",
    "run_experiment",
    "generate_observations",
    "emit_report",
    "load_config",
    "default_inits",
]

THREADS_ENV_VAR = "WCONTRACT_THREADS"

SCENARIOS = (
    "rate_table",
    "kalman_contraction",
    "pf_logistic_contraction",
    "tensor_invariance",
    "tightness",
    "coupling_pathwise",
    "smoothing_theorem2",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run.

    Times are in the units of the model's delta; all quantities are plain
    numbers (see docs/config_schema.md for field-by-field meaning).
    """

    scenario: str
    model: ModelParams
    likelihood: LikelihoodModel | None = None
    horizon: int = 10
    replicates: int = 1
    n_particles: int = 4096
    seed: int = 0
    out: str | None = None
    q: float = 2.0
    threads: int = 0
    dt_fraction: float = 1e-3
    window: int = 2
    smoothing_horizon: int = 20
    grid_nodes: int = 2048
    grid_span: float = 10.0
    burn_in: int = 5
    pf_tolerance: float = 0.1
    smooth_tolerance: float = 1e-3
    ratio_slack: float = 10.0
    n_projections: int = 64
    init_a: tuple = (0.5, 1.5)
    init_b: tuple = (-0.5, 2.0)
    theta0: tuple | None = None
    vartheta0: tuple | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise UnknownScenarioError(f"unknown scenario {self.scenario!r}")
        if self.horizon < 1 or self.replicates < 1 or self.q < 1.0:
            raise InvalidParameterError("need horizon >= 1, replicates >= 1, q >= 1")

    def start_points(self) -> tuple[np.ndarray, np.ndarray]:
        if self.theta0 is not None and self.vartheta0 is not None:
            return (
                np.asarray(self.theta0, dtype=float),
                np.asarray(self.vartheta0, dtype=float),
            )
        return default_inits(self.model.dim)


def default_inits(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Antipodal start points at distance two in every dimension."""
    unit = np.ones(p) / np.sqrt(p)
    return unit, -unit


@dataclass(frozen=True)
class ReportRow:
    k: int
    distance: float
    bound: float
    ratio: float
    passed: bool


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple
    metadata: dict

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _likelihood_from_dict(d: dict) -> LikelihoodModel:
    kind = d["kind"]
    if kind == GAUSSIAN_LINEAR:
        return LikelihoodModel.gaussian(np.asarray(d["H"], float), np.asarray(d["R"], float))
    if kind in (LOGISTIC_GLM, POISSON_GLM):
        cov = np.asarray(d["covariates"], float)
        return LikelihoodModel(kind=kind, covariates=cov)
    if kind == CONSTANT:
        return LikelihoodModel.constant()
    raise InvalidParameterError(f"unknown likelihood kind {kind!r}")


def _likelihood_to_dict(model: LikelihoodModel | None) -> dict | None:
    if model is None:
        return None
    out = {"kind": model.kind}
    if model.kind == GAUSSIAN_LINEAR:
        out["H"] = model.H.tolist()
        out["R"] = model.R.tolist()
    elif model.kind in (LOGISTIC_GLM, POISSON_GLM):
        out["covariates"] = model.covariates.tolist()
    return out


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    m = d.pop("model")
    model = ModelParams(
        alpha=np.asarray(m["alpha"], float),
        beta=np.asarray(m["beta"], float),
        sigma=float(m["sigma"]),
        delta=float(m["delta"]),
    )
    lik = d.pop("likelihood", None)
    likelihood = _likelihood_from_dict(lik) if lik is not None else None
    for key in ("init_a", "init_b", "theta0", "vartheta0"):
        if key in d and d[key] is not None:
            d[key] = tuple(d[key])
    return ExperimentConfig(model=model, likelihood=likelihood, **d)


def config_to_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["model"] = {
        "alpha": config.model.alpha.tolist(),
        "beta": config.model.beta.tolist(),
        "sigma": config.model.sigma,
        "delta": config.model.delta,
    }
    d["likelihood"] = _likelihood_to_dict(config.likelihood)
    for key in ("init_a", "init_b", "theta0", "vartheta0"):
        if d.get(key) is not None:
            d[key] = list(d[key])
    return d


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def resolve_threads(config: ExperimentConfig) -> int:
    if config.threads > 0:
        return config.threads
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# observation generation


def generate_observations(
    params: ModelParams,
    model: LikelihoodModel,
    true_init: np.ndarray,
    k: int,
    seed,
) -> list[Observation]:
    """Simulate the signal at observation times and draw y_0 .. y_k."""
    rng = np.random.default_rng(seed)
    transition = discretize(params, params.delta)
    state = np.asarray(true_init, dtype=float)
    observations = []
    for step in range(k + 1):
        if step > 0:
            state = sample_step(transition, state, rng)
        if model.kind == CONSTANT:
            value = np.zeros(0)
        elif model.kind == GAUSSIAN_LINEAR:
            noise = np.linalg.cholesky(model.R) @ rng.standard_normal(model.H.shape[0])
            value = model.H @ state + noise
        elif model.kind == LOGISTIC_GLM:
            from scipy.special import expit

            probs = expit(model.covariates_at(step) @ state)
            value = (rng.random(probs.shape[0]) < probs).astype(float)
        elif model.kind == POISSON_GLM:
            value = rng.poisson(np.exp(model.covariates_at(step) @ state)).astype(float)
        else:  # pragma: no cover
            raise InvalidParameterError(f"cannot simulate kind {model.kind!r}")
        observations.append(Observation(step=step, value=value))
    return observations


# ---------------------------------------------------------------------------
# scenario implementations


def _rows_from_columns(ks, distances, bounds, passes) -> tuple:
    rows = []
    for k, dist, bound, ok in zip(ks, distances, bounds, passes):
        ratio = dist / bound if bound > 0 else float("inf")
        rows.append(
            ReportRow(k=int(k), distance=float(dist), bound=float(bound),
                      ratio=float(ratio), passed=bool(ok))
        )
    return tuple(rows)


def _require_isotropic(model: ModelParams) -> float:
    lam = -model.beta[0, 0]
    if not np.allclose(model.beta, -lam * np.eye(model.dim), atol=1e-12):
        raise InvalidParameterError("scenario requires beta = -lambda * identity")
    return float(lam)


def _scenario_rate_table(config: ExperimentConfig):
    model = config.model
    lam = _require_isotropic(model)
    lam_g = (
        strong_logconcavity_parameter(config.likelihood)
        if config.likelihood is not None
        else 0.0
    )
    profile = cumulative_bound(model, [lam_g] * config.horizon)
    if lam == 0.0:
        integral = model.delta
    else:
        integral = (1.0 - np.exp(-2.0 * lam * model.delta)) / (2.0 * lam)
    exponent_cf = lam * model.delta + np.log1p(model.sigma**2 * lam_g * integral)
    ks = np.arange(config.horizon + 1)
    closed = np.exp(-exponent_cf * ks)
    bounds = profile.factors()
    passes = np.abs(closed / bounds - 1.0) <= 1e-8
    rows = _rows_from_columns(ks, closed, bounds, passes)
    return rows, {"lambda_g": lam_g, "closed_form_exponent": float(exponent_cf)}


def _scenario_kalman(config: ExperimentConfig):
    model, lik = config.model, config.likelihood
    if lik is None or lik.kind != GAUSSIAN_LINEAR:
        raise InvalidParameterError("kalman_contraction requires a gaussian_linear likelihood")
    theta0, vartheta0 = config.start_points()
    seeds = np.random.SeedSequence(config.seed).spawn(1)
    observations = generate_observations(model, lik, theta0, config.horizon, seeds[0])
    run_a = filter_run(GaussianBelief.dirac(theta0), model, lik, observations)
    run_b = filter_run(GaussianBelief.dirac(vartheta0), model, lik, observations)
    lam_g = strong_logconcavity_parameter(lik)
    factors = cumulative_bound(model, [lam_g] * config.horizon).factors()
    d0 = float(np.linalg.norm(theta0 - vartheta0))
    distances = np.array([gaussian_w2(a, b) for a, b in zip(run_a, run_b)])
    bounds = factors * d0
    passes = distances <= bounds + 1e-10
    ks = np.arange(config.horizon + 1)
    return _rows_from_columns(ks, distances, bounds, passes), {"lambda_g": lam_g}


def _scenario_tightness(config: ExperimentConfig):
    model = config.model
    if model.sigma != 0.0:
        raise InvalidParameterError("tightness scenario requires sigma = 0")
    _require_isotropic(model)
    lik = config.likelihood if config.likelihood is not None else LikelihoodModel.constant()
    theta0, vartheta0 = config.start_points()
    observations = generate_observations(
        model, lik, theta0, config.horizon, np.random.SeedSequence(config.seed)
    )
    run_a = filter_run(GaussianBelief.dirac(theta0), model, lik, observations)
    run_b = filter_run(GaussianBelief.dirac(vartheta0), model, lik, observations)
    lam_g = strong_logconcavity_parameter(lik) if lik.kind == GAUSSIAN_LINEAR else 0.0
    factors = cumulative_bound(model, [lam_g] * config.horizon).factors()
    d0 = float(np.linalg.norm(theta0 - vartheta0))
    distances = np.array([gaussian_w2(a, b) for a, b in zip(run_a, run_b)])
    bounds = factors * d0
    ratios = distances / bounds
    passes = np.abs(ratios - 1.0) <= 1e-10
    ks = np.arange(config.horizon + 1)
    return _rows_from_columns(ks, distances, bounds, passes), {}


def _doubled_likelihood(lik: LikelihoodModel) -> LikelihoodModel:
    if lik.kind != GAUSSIAN_LINEAR:
        raise InvalidParameterError("tensor doubling of the likelihood needs gaussian_linear")
    h = np.block(
        [[lik.H, np.zeros_like(lik.H)], [np.zeros_like(lik.H), lik.H]]
    )
    r = np.block(
        [[lik.R, np.zeros_like(lik.R)], [np.zeros_like(lik.R), lik.R]]
    )
    return LikelihoodModel.gaussian(h, r)


def _scenario_tensor(config: ExperimentConfig):
    model, lik = config.model, config.likelihood
    if lik is None or lik.kind != GAUSSIAN_LINEAR:
        raise InvalidParameterError("tensor_invariance requires a gaussian_linear likelihood")
    doubled = tensor_double(model)
    lik2 = _doubled_likelihood(lik)
    lam_g = strong_logconcavity_parameter(lik)
    profile_base = cumulative_bound(model, [lam_g] * config.horizon)
    profile_doubled = cumulative_bound(doubled, [lam_g] * config.horizon)
    exponent_gap = np.abs(
        profile_base.cumulative_log_bound - profile_doubled.cumulative_log_bound
    )
    theta0, vartheta0 = default_inits(doubled.dim)
    observations = generate_observations(
        doubled, lik2, theta0, config.horizon, np.random.SeedSequence(config.seed)
    )
    run_a = filter_run(GaussianBelief.dirac(theta0), doubled, lik2, observations)
    run_b = filter_run(GaussianBelief.dirac(vartheta0), doubled, lik2, observations)
    d0 = float(np.linalg.norm(theta0 - vartheta0))
    distances = np.array([gaussian_w2(a, b) for a, b in zip(run_a, run_b)])
    bounds = profile_base.factors() * d0  # the base-model bound column, unchanged
    dominated = distances <= bounds + 1e-10
    matched = np.concatenate([[True], exponent_gap <= 1e-12])
    ks = np.arange(config.horizon + 1)
    rows = _rows_from_columns(ks, distances, bounds, dominated & matched)
    return rows, {
        "lambda_g": lam_g,
        "max_exponent_gap": float(exponent_gap.max() if exponent_gap.size else 0.0),
    }


def _scenario_coupling(config: ExperimentConfig):
    model, lik = config.model, config.likelihood
    if lik is None or lik.kind != GAUSSIAN_LINEAR:
        raise InvalidParameterError("coupling_pathwise requires a gaussian_linear likelihood")
    theta0, vartheta0 = config.start_points()
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    window = max(1, config.window)
    observations = generate_observations(model, lik, theta0, window, seeds[0])[1:]
    potentials = backward_potential(model, lik, observations)
    dt = model.delta * config.dt_fraction
    n_pairs = config.replicates
    starts_a = np.tile(theta0, (n_pairs, 1))
    starts_b = np.tile(vartheta0, (n_pairs, 1))
    path_a, path_b = simulate_coupled_paths(
        starts_a, starts_b, potentials, model, dt, seeds[1]
    )
    n_steps = path_a.shape[0] - 1
    step = model.delta / n_steps
    times = np.arange(n_steps + 1) * step
    lam_g = strong_logconcavity_parameter(lik)
    lam_curve = lambda_rate_curve(model, lam_g, times)
    report = pathwise_contraction_check(
        path_a, path_b, lam_curve, step, ratio_slack=config.ratio_slack
    )
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (lam_curve[1:] + lam_curve[:-1]) * step)]
    )
    d0 = float(np.linalg.norm(theta0 - vartheta0))
    n_checkpoints = min(config.horizon, n_steps)
    idx = np.unique((np.arange(n_checkpoints + 1) * n_steps) // n_checkpoints)
    sep = np.linalg.norm(path_a - path_b, axis=-1).max(axis=1)
    distances = sep[idx]
    bounds = np.exp(-cum[idx]) * d0
    tol = 1.0 + config.ratio_slack * step
    passes = distances <= bounds * tol
    rows = _rows_from_columns(np.arange(idx.size), distances, bounds, passes)
    return rows, {
        "lambda_g": lam_g,
        "dt": step,
        "max_pathwise_ratio": report.max_ratio,
        "ratio_tolerance": report.tolerance,
        "checkpoint_times": times[idx].tolist(),
    }


def _coupled_pair_1d(params, lik, observations, theta0, vartheta0, n_particles, seed):
    """Common random numbers: two identically seeded runs stay coupled
    because value-ordered systematic resampling never re-pairs the noise."""
    run_a = pf_run(dirac_sampler(theta0), params, lik, observations, n_particles, seed)
    run_b = pf_run(dirac_sampler(vartheta0), params, lik, observations, n_particles, seed)
    return run_a, run_b


def _pf_pair_distances(job) -> np.ndarray:
    (params, lik, observations, theta0, vartheta0, n_particles, q, seed, directions) = job
    if params.dim == 1:
        run_a, run_b = _coupled_pair_1d(
            params, lik, observations, theta0, vartheta0, n_particles, seed
        )
        return np.array(
            [wq_1d(ca.points[:, 0], cb.points[:, 0], q) for ca, cb in zip(run_a, run_b)]
        )
    # Coordinatewise-factorized model (the tensor-product setting in which
    # the rate is dimension-free): the filter is the product of 1-D filters,
    # so each coordinate runs its own coupled pair and the product clouds are
    # assembled with one shared shuffle per extra coordinate to keep the
    # coordinates independent.
    ss = np.random.SeedSequence(seed) if isinstance(seed, int) else seed
    blocks = split_factorized(params, lik)
    children = ss.spawn(len(blocks) + 1)
    shuffle_rng = np.random.default_rng(children[-1])
    n_steps = len(observations)
    pts_a = [np.empty((n_particles, params.dim)) for _ in range(n_steps)]
    pts_b = [np.empty((n_particles, params.dim)) for _ in range(n_steps)]
    for (coord, sub_params, sub_lik, rows), child in zip(blocks, children):
        sub_obs = [
            Observation(step=o.step, value=o.value[rows]) for o in observations
        ]
        run_a, run_b = _coupled_pair_1d(
            sub_params, sub_lik, sub_obs,
            theta0[coord : coord + 1], vartheta0[coord : coord + 1],
            n_particles, child,
        )
        # identical reshuffle for both runs preserves their pairwise coupling
        perm = (
            np.arange(n_particles) if coord == 0
            else shuffle_rng.permutation(n_particles)
        )
        for k in range(n_steps):
            pts_a[k][:, coord] = run_a[k].points[perm, 0]
            pts_b[k][:, coord] = run_b[k].points[perm, 0]
    return np.array(
        [sliced_wq(a, b, q, directions=directions) for a, b in zip(pts_a, pts_b)]
    )


def _scenario_pf(config: ExperimentConfig):
    model, lik = config.model, config.likelihood
    if lik is None or lik.kind not in (LOGISTIC_GLM, POISSON_GLM, CONSTANT):
        raise InvalidParameterError(
            "pf_logistic_contraction expects a log-concave GLM or constant likelihood"
        )
    theta0, vartheta0 = config.start_points()
    ss = np.random.SeedSequence(config.seed)
    obs_seed, proj_seed, *rep_seeds = ss.spawn(2 + config.replicates)
    observations = generate_observations(model, lik, theta0, config.horizon, obs_seed)
    directions = None
    if model.dim > 1:
        rng = np.random.default_rng(proj_seed)
        directions = rng.standard_normal((config.n_projections, model.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    jobs = [
        (model, lik, observations, theta0, vartheta0, config.n_particles, config.q,
         seed, directions)
        for seed in rep_seeds
    ]
    threads = resolve_threads(config)
    if threads > 1 and config.replicates > 1:
        with ProcessPoolExecutor(max_workers=min(threads, config.replicates)) as pool:
            results = list(pool.map(_pf_pair_distances, jobs))
    else:
        results = [_pf_pair_distances(job) for job in jobs]
    all_distances = np.stack(results)  # (replicates, k + 1)
    median = np.median(all_distances, axis=0)
    p90 = np.percentile(all_distances, 90, axis=0)
    factors = cumulative_bound(model, [0.0] * config.horizon).factors()
    d0 = float(median[0])
    bounds = factors * d0
    ks = np.arange(config.horizon + 1)
    passes = (ks < config.burn_in) | (median <= bounds * (1.0 + config.pf_tolerance))
    rows = _rows_from_columns(ks, median, bounds, passes)
    return rows, {
        "percentile90": p90.tolist(),
        "initial_distance": d0,
        "tolerance": config.pf_tolerance,
        "burn_in": config.burn_in,
    }


def _scenario_smoothing(config: ExperimentConfig):
    model, lik = config.model, config.likelihood
    if model.dim != 1:
        raise InvalidParameterError("smoothing_theorem2 runs on one-dimensional models")
    if lik is None or lik.kind != LOGISTIC_GLM:
        raise InvalidParameterError("smoothing_theorem2 expects a logistic likelihood")
    horizon, window = config.horizon, config.smoothing_horizon
    total = horizon + window
    ss = np.random.SeedSequence(config.seed)
    observations = generate_observations(model, lik, np.zeros(1), total, ss)
    mean_a, std_a = config.init_a
    mean_b, std_b = config.init_b
    nodes = build_grid(
        model,
        [(mean_a, std_a), (mean_b, std_b), (0.0, 1.0)],
        total,
        n_nodes=config.grid_nodes,
        span=config.grid_span,
    )
    kernel = GridKernel.for_model(model, nodes)
    mu0 = gaussian_grid(nodes, 0.0, 1.0)
    state = smoothing_state(model, lik, observations, mu0, kernel=kernel)
    run_a = grid_filter_run(gaussian_grid(nodes, mean_a, std_a), model, lik,
                            observations[: horizon + 1], kernel=kernel)
    run_b = grid_filter_run(gaussian_grid(nodes, mean_b, std_b), model, lik,
                            observations[: horizon + 1], kernel=kernel)
    distances = np.empty(horizon + 1)
    for k in range(horizon + 1):
        weight = phi_backward(
            model, lik, observations, k + 1, k + window, nodes, kernel=kernel
        )
        log_weight = kernel.backward_function(weight.log_phi)
        distances[k] = weighted_wasserstein(run_a[k], run_b[k], log_weight, config.q)
    lam_g = strong_logconcavity_parameter(lik) if lik.kind == GAUSSIAN_LINEAR else 0.0
    factors = cumulative_bound(model, [lam_g] * horizon).factors()
    bounds = factors * distances[0]
    passes = distances <= bounds * (1.0 + config.smooth_tolerance)
    ks = np.arange(horizon + 1)
    horizons = sorted({max(2, window // 4), window // 2, 3 * window // 4, window})
    decay = horizon_decay(model, lik, observations, 1, horizons, nodes, state,
                          kernel=kernel)
    rows = _rows_from_columns(ks, distances, bounds, passes)
    return rows, {
        "cauchy_decay_horizons": list(horizons),
        "cauchy_decay": decay.tolist(),
        "varsigma_range": [float(state.varsigma_seq.min()), float(state.varsigma_seq.max())],
    }


_RUNNERS = {
    "rate_table": _scenario_rate_table,
    "kalman_contraction": _scenario_kalman,
    "pf_logistic_contraction": _scenario_pf,
    "tensor_invariance": _scenario_tensor,
    "tightness": _scenario_tightness,
    "coupling_pathwise": _scenario_coupling,
    "smoothing_theorem2": _scenario_smoothing,
}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Dispatch to the configured scenario and assemble the report."""
    if config.scenario not in _RUNNERS:
        raise UnknownScenarioError(f"unknown scenario {config.scenario!r}")
    start = time.perf_counter()
    rows, extra = _RUNNERS[config.scenario](config)
    wall = time.perf_counter() - start
    metadata = {
        "config": config_to_dict(config),
        "versions": {
            "wcontract": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": wall,
        **extra,
    }
    return ExperimentReport(rows=rows, metadata=metadata)


# ---------------------------------------------------------------------------
# report emission


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_report(report: ExperimentReport, fmt: str, path: str) -> None:
    """Write the report as CSV (k, distance, bound, ratio, pass) or JSON."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "distance", "bound", "ratio", "pass"])
            for r in report.rows:
                writer.writerow(
                    [r.k, _fmt(r.distance), _fmt(r.bound), _fmt(r.ratio),
                     "true" if r.passed else "false"]
                )
    elif fmt == "json":
        payload = {
            "rows": [
                {"k": r.k, "distance": r.distance, "bound": r.bound,
                 "ratio": r.ratio, "pass": r.passed}
                for r in report.rows
            ],
            "metadata": report.metadata,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise InvalidParameterError(f"unknown report format {fmt!r}")
