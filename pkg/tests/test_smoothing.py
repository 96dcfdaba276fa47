import numpy as np
import pytest

from wcontract.coupling import backward_potential
from wcontract.errors import InvalidParameterError, NumericError
from wcontract.likelihood import (
    LikelihoodModel,
    Observation,
    log_g_many,
    strong_logconcavity_parameter,
)
from wcontract.particle import (
    GridDensity,
    GridKernel,
    build_grid,
    gaussian_grid,
    grid_filter_run,
    grid_filter_step,
    normalize_grid,
)
from wcontract.rates import cumulative_bound
from wcontract.signal_model import ModelParams, discretize
from wcontract.smoothing import (
    eigen_residual,
    horizon_decay,
    logconcavity_check,
    matrix_identity_check,
    phi_backward,
    r_kernel_compose,
    smoothing_state,
    v_weight,
    weighted_wasserstein,
)
from wcontract.transport import wq_grid_1d


def make_params(beta=-0.5, sigma=1.0, delta=1.0):
    return ModelParams(
        alpha=np.zeros(1), beta=np.array([[beta]]), sigma=sigma, delta=delta
    )


def logistic_obs(k, seed=0):
    rng = np.random.default_rng(seed)
    return [
        Observation(step=j, value=np.array([float(rng.integers(0, 2))]))
        for j in range(k + 1)
    ]


@pytest.fixture(scope="module")
def logistic_setup():
    params = make_params()
    model = LikelihoodModel.logistic(np.array([[1.0]]))
    obs = logistic_obs(24, seed=3)
    nodes = build_grid(params, [(0.0, 1.0)], 24, n_nodes=2048, span=10.0)
    kernel = GridKernel.for_model(params, nodes)
    mu0 = gaussian_grid(nodes, 0.0, 1.0)
    state = smoothing_state(params, model, obs, mu0, kernel=kernel)
    return params, model, obs, nodes, kernel, state


class TestPhiBackward:
    def test_base_case(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        w = phi_backward(params, model, obs, 4, 4, nodes, kernel=kernel)
        expected = log_g_many(model, nodes[:, None], obs[4])
        np.testing.assert_allclose(w.log_phi, expected, atol=1e-14)

    def test_constant_likelihood_is_unit(self):
        params = make_params()
        model = LikelihoodModel.constant()
        obs = [Observation(step=j, value=np.zeros(0)) for j in range(6)]
        nodes = np.linspace(-14, 14, 2048)
        w = phi_backward(params, model, obs, 1, 5, nodes)
        interior = np.abs(nodes) < 6.0
        assert np.abs(w.log_phi[interior]).max() < 1e-8

    def test_gaussian_matches_quadratic_potential(self):
        params = make_params(beta=-0.6, sigma=0.9)
        model = LikelihoodModel.gaussian(np.array([[1.1]]), np.array([[0.8]]))
        rng = np.random.default_rng(11)
        obs = [Observation(step=j, value=rng.normal(size=1)) for j in range(4)]
        nodes = np.linspace(-16, 16, 4096)
        w = phi_backward(params, model, obs, 1, 3, nodes)
        terminal = backward_potential(
            params, model, obs[1:4], np.array([params.delta])
        )[-1]
        quad_vals = (
            -0.5 * terminal.J[0, 0] * nodes**2 + terminal.b[0] * nodes + terminal.c
        )
        interior = np.abs(nodes) < 8.0
        assert np.abs(w.log_phi[interior] - quad_vals[interior]).max() < 1e-6

    def test_normalizer_equals_varsigma_product(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        j, k = 2, 7
        w = phi_backward(params, model, obs, j, k, nodes, state=state, kernel=kernel)
        expected = np.prod(state.varsigma_seq[j : k + 1])
        assert w.normalizer == pytest.approx(expected, rel=1e-8)


class TestSmoothingState:
    def test_varsigma_in_unit_interval_for_logistic(self, logistic_setup):
        _, _, _, _, _, state = logistic_setup
        assert np.all(state.varsigma_seq > 0.0)
        assert np.all(state.varsigma_seq < 1.0)

    def test_eta_is_predicted_filter(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        pis = grid_filter_run(state.reference_init, params, model, obs, kernel=kernel)
        for k in (1, 5):
            predicted = kernel.forward_measure(pis[k - 1].log_values)
            eta = normalize_grid(GridDensity(nodes=nodes, log_values=predicted))
            np.testing.assert_allclose(
                state.eta_seq[k].log_values, eta.log_values, atol=1e-10
            )


class TestEigenResidual:
    def test_finite_horizon_identity(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        k = 9
        for j in (1, 3, 6):
            w_jk = phi_backward(params, model, obs, j, k, nodes, state=state, kernel=kernel)
            w_prev = phi_backward(
                params, model, obs, j - 1, k, nodes, state=state, kernel=kernel
            )
            res = eigen_residual(state, w_jk, w_prev, params, model, obs, kernel=kernel)
            assert res <= 1e-6

    def test_constant_likelihood_residual_zero(self):
        params = make_params()
        model = LikelihoodModel.constant()
        obs = [Observation(step=j, value=np.zeros(0)) for j in range(6)]
        nodes = np.linspace(-16, 16, 2048)
        kernel = GridKernel.for_model(params, nodes)
        mu0 = gaussian_grid(nodes, 0.0, 1.0)
        state = smoothing_state(params, model, obs, mu0, kernel=kernel)
        w_jk = phi_backward(params, model, obs, 2, 5, nodes, state=state, kernel=kernel)
        w_prev = phi_backward(params, model, obs, 1, 5, nodes, state=state, kernel=kernel)
        res = eigen_residual(state, w_jk, w_prev, params, model, obs, kernel=kernel)
        assert res <= 1e-7

    def test_horizon_decay_is_decreasing(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        decays = horizon_decay(
            params, model, obs, 1, [6, 10, 14, 18], nodes, state, kernel=kernel
        )
        assert np.all(np.diff(decays) < 0)
        assert decays[-1] < 1e-4


class TestLogConcavity:
    def test_gaussian_log_density_passes(self):
        nodes = np.linspace(-8, 8, 1024)
        report = logconcavity_check(-0.5 * nodes**2, nodes)
        assert report.passed
        assert report.max_second_difference < 0

    def test_logistic_phi_passes(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        w = phi_backward(params, model, obs, 1, 10, nodes, kernel=kernel)
        assert logconcavity_check(w.log_phi, nodes, lambda_g=0.0).passed

    def test_gaussian_phi_strong_logconcavity_offset(self):
        params = make_params(beta=0.3, sigma=0.8)  # mildly unstable drift
        model = LikelihoodModel.gaussian(np.array([[1.0]]), np.array([[0.6]]))
        rng = np.random.default_rng(21)
        obs = [Observation(step=j, value=rng.normal(size=1)) for j in range(4)]
        nodes = np.linspace(-18, 18, 2048)
        w = phi_backward(params, model, obs, 1, 3, nodes)
        lam_g = strong_logconcavity_parameter(model)
        assert logconcavity_check(w.log_phi, nodes, lambda_g=lam_g).passed

    def test_kernel_preserves_log_concavity(self):
        params = make_params(beta=-0.5, sigma=1.0)
        nodes = np.linspace(-16, 16, 2048)
        kernel = GridKernel.for_model(params, nodes)
        rng = np.random.default_rng(33)
        for _ in range(50):
            centers = rng.uniform(-3, 3, size=3)
            curvs = rng.uniform(0.1, 2.0, size=3)
            offsets = rng.uniform(-1, 1, size=3)
            profile = np.min(
                [-0.5 * c * (nodes - m) ** 2 + o for m, c, o in zip(centers, curvs, offsets)],
                axis=0,
            )
            out = kernel.backward_function(profile)
            report = logconcavity_check(out, nodes)
            assert report.passed, report.max_second_difference

    def test_marginalization_preserves_log_concavity(self):
        # joint log-concave in (u, v); numerical marginal over v stays log-concave
        rng = np.random.default_rng(41)
        u = np.linspace(-6, 6, 512)
        v = np.linspace(-8, 8, 1024)
        for _ in range(10):
            a = rng.uniform(0.3, 1.5)
            b = rng.uniform(0.3, 1.5)
            c = rng.uniform(0.0, 1.0)
            d = rng.uniform(0.0, 1.0)
            joint = (
                -0.5 * (a * u[:, None] ** 2 + b * v[None, :] ** 2
                        + c * (u[:, None] - v[None, :]) ** 2)
                - d * np.abs(u[:, None] + v[None, :])
            )
            marginal = np.log(np.trapezoid(np.exp(joint), v, axis=1))
            assert logconcavity_check(marginal, u).passed

    def test_nonuniform_grid_rejected(self):
        nodes = np.array([0.0, 1.0, 3.0])
        with pytest.raises(InvalidParameterError):
            logconcavity_check(np.zeros(3), nodes)


class TestWeightedWasserstein:
    def test_unit_weight_reduces_to_plain_distance(self):
        nodes = np.linspace(-12, 12, 2048)
        f = gaussian_grid(nodes, -0.5, 1.0)
        g = gaussian_grid(nodes, 1.0, 1.4)
        plain = wq_grid_1d(f, g, 2.0)
        weighted = weighted_wasserstein(f, g, np.zeros_like(nodes), 2.0)
        assert weighted == pytest.approx(plain, abs=1e-12)

    def test_identical_inputs(self):
        nodes = np.linspace(-10, 10, 1024)
        f = gaussian_grid(nodes, 0.2, 0.9)
        assert weighted_wasserstein(f, f, -0.1 * nodes**2, 2.0) == 0.0

    def test_metric_axioms_on_triples(self):
        nodes = np.linspace(-12, 12, 2048)
        rng = np.random.default_rng(51)
        log_w = -0.2 * np.abs(nodes)
        ds = []
        densities = [
            gaussian_grid(nodes, rng.uniform(-1, 1), rng.uniform(0.7, 1.5))
            for _ in range(3)
        ]
        for i in range(3):
            for j in range(3):
                ds.append(weighted_wasserstein(densities[i], densities[j], log_w, 2.0))
        d = np.array(ds).reshape(3, 3)
        assert np.allclose(d, d.T, atol=1e-12)
        assert d[0, 2] <= d[0, 1] + d[1, 2] + 1e-10
        assert np.all(np.diag(d) == 0.0)


class TestRKernelCompose:
    def test_single_step_constant_weight_is_prediction(self):
        params = make_params()
        nodes = np.linspace(-14, 14, 2048)
        model = LikelihoodModel.constant()
        obs = [Observation(step=j, value=np.zeros(0)) for j in range(2)]
        w = phi_backward(params, model, obs, 1, 1, nodes)
        out = r_kernel_compose([w], 0.8, params)
        tr = discretize(params, params.delta)
        ref = gaussian_grid(nodes, tr.a[0] + tr.B[0, 0] * 0.8, np.sqrt(tr.noise_cov[0, 0]))
        assert wq_grid_1d(out, ref, 1.0) <= 1e-6

    def test_composition_matches_direct_filter(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        k = 8
        theta = 0.9
        weights = [
            phi_backward(params, model, obs, j, k, nodes, kernel=kernel)
            for j in range(1, k + 1)
        ]
        composed = r_kernel_compose(weights, theta, params, kernel=kernel)
        # direct filter from the Dirac: step 1 is analytic, then grid steps
        tr = kernel.transition
        s2 = tr.noise_cov[0, 0]
        log_p1 = (
            -0.5 * (nodes - (tr.a[0] + tr.B[0, 0] * theta)) ** 2 / s2
            - 0.5 * np.log(2 * np.pi * s2)
            + log_g_many(model, nodes[:, None], obs[1])
        )
        current = normalize_grid(GridDensity(nodes=nodes, log_values=log_p1))
        for j in range(2, k + 1):
            current = grid_filter_step(current, tr, model, obs[j], kernel=kernel)
        assert wq_grid_1d(composed, current, 1.0) <= 1e-4

    def test_two_point_masses_respect_rate_bound(self, logistic_setup):
        params, model, obs, nodes, kernel, state = logistic_setup
        k = 6
        weights = [
            phi_backward(params, model, obs, j, k, nodes, kernel=kernel)
            for j in range(1, k + 1)
        ]
        theta, vartheta = 1.0, -1.0
        out_a = r_kernel_compose(weights, theta, params, kernel=kernel)
        out_b = r_kernel_compose(weights, vartheta, params, kernel=kernel)
        factor = cumulative_bound(params, [0.0] * k).bound_factor(k)
        for q in (1.0, 2.0):
            dist = wq_grid_1d(out_a, out_b, q)
            assert dist <= factor * abs(theta - vartheta) + 1e-4


class TestMatrixIdentity:
    def test_identity_matrices(self):
        rng = np.random.default_rng(61)
        for _ in range(5):
            u, v = rng.normal(size=2), rng.normal(size=2)
            assert matrix_identity_check(np.eye(2), np.eye(2), u, v) <= 1e-12

    def test_random_symmetric_instances(self):
        rng = np.random.default_rng(62)
        for _ in range(100):
            f = rng.normal(size=(5, 5))
            s = rng.normal(size=(5, 5))
            f, s = f + f.T, s + s.T
            if abs(np.linalg.det(f + s)) < 1e-6:
                continue
            u, v = rng.normal(size=5), rng.normal(size=5)
            scale = max(1.0, abs(v @ f @ v) + abs((u - v) @ s @ (u - v)))
            assert matrix_identity_check(f, s, u, v) <= 1e-9 * scale

    def test_equal_arguments_reduction(self):
        rng = np.random.default_rng(63)
        f = rng.normal(size=(3, 3))
        f = f @ f.T + np.eye(3)
        s = rng.normal(size=(3, 3))
        s = s @ s.T + np.eye(3)
        u = rng.normal(size=3)
        assert matrix_identity_check(f, s, u, u) <= 1e-12

    def test_singular_sum_rejected(self):
        with pytest.raises(NumericError):
            matrix_identity_check(
                np.eye(2), -np.eye(2), np.ones(2), np.zeros(2)
            )


def test_v_weight_shape():
    nodes = np.array([-2.0, 0.0, 1.0])
    np.testing.assert_allclose(v_weight(nodes, c=0.5), [2.0, 1.0, 1.5])
