import numpy as np
import pytest

from wcontract.errors import InvalidParameterError, NumericError
from wcontract.signal_model import (
    DiscreteTransition,
    ModelParams,
    discretize,
    psd_factor,
    sample_step,
    spectral,
    tensor_double,
)


def make_params(beta, alpha=None, sigma=1.0, delta=1.0):
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    p = beta.shape[0]
    if alpha is None:
        alpha = np.zeros(p)
    return ModelParams(alpha=alpha, beta=beta, sigma=sigma, delta=delta)


class TestDiscretize:
    def test_zero_drift_identity(self):
        params = make_params(np.zeros((2, 2)), sigma=1.0, delta=0.7)
        tr = discretize(params, params.delta)
        np.testing.assert_allclose(tr.B, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(tr.a, np.zeros(2), atol=1e-14)
        np.testing.assert_allclose(tr.noise_cov, 0.7 * np.eye(2), atol=1e-12)

    def test_scalar_closed_form(self):
        # beta=-1, sigma=1, horizon=1: cov = int_0^1 e^{-2s} ds = (1 - e^-2)/2
        params = make_params([[-1.0]])
        tr = discretize(params, 1.0)
        expected = (1.0 - np.exp(-2.0)) / 2.0
        # cross-check the closed form with dense trapezoid quadrature
        s = np.linspace(0.0, 1.0, 100001)
        quad = np.trapezoid(np.exp(-2.0 * s), s)
        assert abs(quad - expected) < 1e-9
        assert abs(tr.B[0, 0] - np.exp(-1.0)) < 1e-12
        assert abs(tr.a[0]) < 1e-14
        assert abs(tr.noise_cov[0, 0] - expected) < 1e-12

    def test_drift_offset_zero_beta(self):
        params = make_params(np.zeros((2, 2)), alpha=np.array([1.0, 0.0]), delta=0.3)
        tr = discretize(params, params.delta)
        np.testing.assert_allclose(tr.a, 0.3 * np.array([1.0, 0.0]), atol=1e-14)

    def test_cov_matches_quadrature_random_matrix(self):
        rng = np.random.default_rng(5)
        beta = rng.normal(size=(3, 3)) * 0.6
        params = make_params(beta, sigma=0.8, delta=0.9)
        tr = discretize(params, params.delta)
        from scipy.linalg import expm

        s = np.linspace(0.0, 0.9, 4001)
        acc = np.zeros((3, 3))
        mats = [expm(beta * si) for si in s]
        vals = np.array([m @ m.T for m in mats])
        acc = np.trapezoid(vals, s, axis=0)
        np.testing.assert_allclose(tr.noise_cov, 0.64 * acc, atol=1e-7)

    def test_semigroup_property(self):
        rng = np.random.default_rng(11)
        beta = rng.normal(size=(3, 3)) * 0.5
        params = make_params(beta)
        b1 = discretize(params, 0.4).B
        b2 = discretize(params, 0.6).B
        b12 = discretize(params, 1.0).B
        np.testing.assert_allclose(b1 @ b2, b12, atol=1e-10)

    def test_moment_ode_euler_agreement(self):
        # Euler stepping of the exact moment ODEs over one delta, step delta/1e4
        rng = np.random.default_rng(3)
        beta = rng.normal(size=(2, 2)) * 0.7
        alpha = rng.normal(size=2)
        params = make_params(beta, alpha=alpha, sigma=1.3, delta=0.8)
        tr = discretize(params, params.delta)
        n = 10_000
        h = params.delta / n
        m = rng.normal(size=2)
        cov = np.zeros((2, 2))
        mean_exact = tr.a + tr.B @ m
        for _ in range(n):
            cov = cov + (beta @ cov + cov @ beta.T + params.sigma**2 * np.eye(2)) * h
            m = m + (alpha + beta @ m) * h
        assert np.abs(m - mean_exact).max() < 1e-3 * max(1.0, np.abs(mean_exact).max())
        assert np.abs(cov - tr.noise_cov).max() < 1e-3 * max(1.0, np.abs(tr.noise_cov).max())

    def test_sigma_zero_noise_free(self):
        params = make_params([[-0.5]], sigma=0.0)
        tr = discretize(params, 1.0)
        assert np.all(tr.noise_cov == 0.0)

    def test_nonfinite_params_rejected(self):
        with pytest.raises(InvalidParameterError):
            make_params([[np.nan]])
        with pytest.raises(InvalidParameterError):
            make_params([[-1.0]], sigma=-0.1)
        params = make_params([[-1.0]])
        with pytest.raises(InvalidParameterError):
            discretize(params, 0.0)


class TestSpectral:
    def test_isotropic_beta(self):
        lam = 0.7
        params = make_params(-lam * np.eye(3))
        prof = spectral(params)
        assert abs(prof.lambda_sig - lam) < 1e-12
        for t in (0.0, 0.3, 1.2):
            assert abs(prof.lambda_beta_min(t) - np.exp(-2 * lam * t)) < 1e-12
            assert abs(prof.lambda_beta_max(t) - np.exp(-2 * lam * t)) < 1e-12

    def test_skew_symmetric_is_rotation(self):
        beta = np.array([[0.0, 1.5], [-1.5, 0.0]])
        prof = spectral(make_params(beta))
        assert abs(prof.lambda_sig) < 1e-12
        for t in (0.1, 0.5, 2.0):
            assert abs(prof.lambda_beta_min(t) - 1.0) < 1e-10
            assert abs(prof.lambda_beta_max(t) - 1.0) < 1e-10

    def test_random_matrix_vs_svd_oracle(self):
        rng = np.random.default_rng(7)
        beta = rng.normal(size=(3, 3))
        prof = spectral(make_params(beta))
        from scipy.linalg import expm

        for t in (0.1, 0.5, 1.0):
            sv = np.linalg.svd(expm(beta * t), compute_uv=False)
            assert abs(prof.lambda_beta_min(t) - sv[-1] ** 2) < 1e-10
            assert abs(prof.lambda_beta_max(t) - sv[0] ** 2) < 1e-10

    def test_extremes_at_zero(self):
        prof = spectral(make_params(np.random.default_rng(0).normal(size=(2, 2))))
        assert prof.lambda_beta_min(0.0) == pytest.approx(1.0, abs=1e-13)
        assert prof.lambda_beta_max(0.0) == pytest.approx(1.0, abs=1e-13)

    def test_capital_lambda_monotone_and_zero_at_zero(self):
        prof = spectral(make_params([[0.4]], sigma=1.1))
        assert prof.capital_lambda(0.0) == 0.0
        vals = [prof.capital_lambda(t) for t in (0.2, 0.5, 1.0, 2.0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        # closed form sigma^2 * int e^{0.8 s} ds
        t = 1.0
        expected = 1.1**2 * (np.exp(0.8 * t) - 1.0) / 0.8
        assert abs(prof.capital_lambda(t) - expected) < 1e-9


class TestTensorDouble:
    def test_block_structure(self):
        params = make_params([[-2.0]], alpha=np.array([0.3]))
        doubled = tensor_double(params)
        np.testing.assert_allclose(doubled.beta, np.diag([-2.0, -2.0]))
        np.testing.assert_allclose(doubled.alpha, [0.3, 0.3])
        assert doubled.sigma == params.sigma and doubled.delta == params.delta

    def test_spectral_invariance(self):
        rng = np.random.default_rng(13)
        beta = rng.normal(size=(3, 3)) * 0.8
        params = make_params(beta, sigma=0.9)
        p1 = spectral(params)
        p2 = spectral(tensor_double(params))
        assert abs(p1.lambda_sig - p2.lambda_sig) < 1e-12
        for t in (0.1, 0.7, 1.3):
            assert abs(p1.lambda_beta_min(t) - p2.lambda_beta_min(t)) < 1e-12
            assert abs(p1.lambda_beta_max(t) - p2.lambda_beta_max(t)) < 1e-12
            assert abs(p1.capital_lambda(t) - p2.capital_lambda(t)) < 1e-10


class TestSampleStep:
    def test_deterministic_when_noise_free(self):
        params = make_params([[-0.5]], alpha=np.array([0.2]), sigma=0.0)
        tr = discretize(params, 1.0)
        rng = np.random.default_rng(0)
        x = sample_step(tr, np.array([1.0]), rng)
        np.testing.assert_allclose(x, tr.a + tr.B @ np.array([1.0]), atol=1e-15)

    def test_monte_carlo_moments(self):
        rng = np.random.default_rng(21)
        beta = rng.normal(size=(2, 2)) * 0.5
        params = make_params(beta, alpha=np.array([0.1, -0.2]), sigma=0.7, delta=0.6)
        tr = discretize(params, params.delta)
        state = np.array([0.5, -1.0])
        n = 1_000_000
        draws = sample_step(tr, np.tile(state, (n, 1)), rng)
        mean_exact = tr.a + tr.B @ state
        se_mean = np.sqrt(np.diag(tr.noise_cov) / n)
        assert np.all(np.abs(draws.mean(axis=0) - mean_exact) < 4 * se_mean)
        cov_emp = np.cov(draws.T)
        # var of empirical covariance entry ~ (c_ii c_jj + c_ij^2) / n
        c = tr.noise_cov
        se_cov = np.sqrt((np.outer(np.diag(c), np.diag(c)) + c**2) / n)
        assert np.all(np.abs(cov_emp - c) < 4 * se_cov)

    def test_indefinite_factor_rejected(self):
        with pytest.raises(NumericError):
            psd_factor(np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_transition_invariants(self):
        with pytest.raises(InvalidParameterError):
            DiscreteTransition(
                a=np.zeros(2), B=np.eye(2), noise_cov=np.array([[1.0, 0.5], [-0.5, 1.0]])
            )
