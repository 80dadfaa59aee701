import math

import numpy as np
import pytest

from kdebo.gp import (GpHyperparams, GpPosterior, NumericalError, fit_gp, fit_hyperparams,
                      gram, lml_and_grad, log_marginal_likelihood, mean_var, posterior, ucb)
from kdebo.kernels import matern52_numpy
from kdebo.rng import SeedStream


def unit(noise=1.0, d=1):
    return GpHyperparams(np.ones(d), 1.0, noise)


def dense_posterior(X, y, Z, hyper):
    """Explicit-inverse oracle for the posterior mean and variance."""
    K = matern52_numpy(X, X, hyper.lengthscales, hyper.signal_variance)
    Kinv = np.linalg.inv(K + hyper.noise_variance * np.eye(len(X)))
    Ks = matern52_numpy(Z, X, hyper.lengthscales, hyper.signal_variance)
    mean = Ks @ Kinv @ y
    var = hyper.signal_variance - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
    return mean, var


class TestLogMarginalLikelihood:
    def test_empty(self):
        assert log_marginal_likelihood(np.zeros((0, 1)), [], unit()) == 0.0

    def test_single_point_zero_target(self):
        expect = -0.5 * math.log(2) - 0.5 * math.log(2 * math.pi)
        assert expect == pytest.approx(-1.26551, abs=1e-5)
        assert log_marginal_likelihood([[0.0]], [0.0], unit()) == pytest.approx(expect, abs=1e-12)

    def test_single_point_unit_target(self):
        expect = -0.25 - 0.5 * math.log(4 * math.pi)
        assert expect == pytest.approx(-1.51551, abs=1e-5)
        assert log_marginal_likelihood([[0.0]], [1.0], unit()) == pytest.approx(expect, abs=1e-12)

    def test_matches_dense_formula(self, rng):
        X = rng.uniform(size=(15, 2))
        y = rng.normal(size=15)
        h = GpHyperparams(np.array([0.3, 0.7]), 1.4, 0.05)
        K = gram(X, h) + h.noise_variance * np.eye(15)
        expect = (-0.5 * y @ np.linalg.solve(K, y) - 0.5 * np.linalg.slogdet(K)[1]
                  - 7.5 * math.log(2 * math.pi))
        assert log_marginal_likelihood(X, y, h) == pytest.approx(expect, rel=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        d = 1 + seed % 3
        X = rng.uniform(size=(25, d))
        y = np.sin(3 * X.sum(1)) + 0.1 * rng.normal(size=25)
        theta = np.concatenate([np.log(rng.uniform(0.1, 1.0, d)),
                                [np.log(rng.uniform(0.5, 2)), np.log(rng.uniform(1e-3, 0.1))]])
        _, g = lml_and_grad(theta, X, y)
        step = 1e-5
        for k in range(len(theta)):
            e = np.zeros_like(theta)
            e[k] = step
            fd = (lml_and_grad(theta + e, X, y)[0] - lml_and_grad(theta - e, X, y)[0]) / (2 * step)
            assert g[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)


class TestPosterior:
    def test_prior(self):
        post = posterior(np.zeros((0, 2)), [], GpHyperparams(np.ones(2), 1.0, 1e-2))
        m, v = mean_var(post, [0.3, 0.4])
        assert m == 0.0 and v == 1.0

    def test_noiseless_single_point_interpolates(self):
        h = GpHyperparams(np.ones(1), 1.0, 0.0)
        post = posterior([[0.3]], [2.5], h)
        m, v = mean_var(post, [0.3])
        assert m == pytest.approx(2.5, abs=1e-12)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_one_point_unit_noise(self):
        post = posterior([[0.3]], [2.0], unit(1.0))
        m, v = mean_var(post, [0.3])
        assert m == pytest.approx(1.0, abs=1e-12)
        assert v == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_agrees_with_dense_solve(self, seed):
        rng = np.random.default_rng(seed)
        n, d = rng.integers(1, 51), rng.integers(1, 4)
        X = rng.uniform(size=(n, d))
        y = rng.normal(size=n)
        h = GpHyperparams(rng.uniform(0.2, 1.5, d), rng.uniform(0.5, 2), rng.uniform(1e-3, 0.5))
        Z = rng.uniform(size=(100, d))
        m, v = posterior(X, y, h).mean_var(Z)
        m0, v0 = dense_posterior(X, y, Z, h)
        np.testing.assert_allclose(m, m0, atol=1e-8)
        np.testing.assert_allclose(v, np.maximum(v0, 0), atol=1e-8)

    def test_zero_noise_interpolation(self, rng):
        X = rng.uniform(size=(20, 2))
        y = rng.normal(size=20)
        post = posterior(X, y, GpHyperparams(np.array([0.3, 0.3]), 1.0, 0.0))
        np.testing.assert_allclose(post.mean_var(X)[0], y, atol=1e-6)

    def test_variance_non_increasing_with_data(self, rng):
        h = GpHyperparams(np.array([0.4, 0.6]), 1.3, 1e-3)
        X = rng.uniform(size=(30, 2))
        y = rng.normal(size=30)
        Z = rng.uniform(size=(100, 2))
        prev = posterior(X[:0], y[:0], h).mean_var(Z)[1]
        for n in range(1, 31):
            cur = posterior(X[:n], y[:n], h).mean_var(Z)[1]
            assert np.all(cur <= prev + 1e-8)
            prev = cur

    def test_variance_is_clamped_non_negative(self):
        X = np.repeat([[0.5]], 3, axis=0)
        post = posterior(X, [1.0, 1.0, 1.0], GpHyperparams(np.ones(1), 1.0, 1e-12))
        assert post.mean_var([[0.5]])[1][0] >= 0.0

    def test_standardization_round_trip(self, rng):
        X = rng.uniform(size=(12, 1))
        y = 50 + 10 * np.sin(6 * X[:, 0])
        h = GpHyperparams(np.array([0.2]), 1.0, 1e-8)
        post = GpPosterior(X, y, h, standardize=True)
        np.testing.assert_allclose(post.mean_var(X)[0], y, atol=1e-4)

    def test_bounds_normalization(self, rng):
        X = rng.uniform(size=(10, 1))
        y = rng.normal(size=10)
        h = GpHyperparams(np.array([0.3]), 1.0, 1e-2)
        a = GpPosterior(X, y, h)
        b = GpPosterior(2 + 3 * X, y, h, bounds=(np.array([2.0]), np.array([5.0])))
        Z = rng.uniform(size=(7, 1))
        np.testing.assert_allclose(a.mean_var(Z)[0], b.mean_var(2 + 3 * Z)[0], atol=1e-12)

    def test_cholesky_failure_raises(self):
        h = GpHyperparams(np.ones(1), 1.0, -10.0)
        with pytest.raises(NumericalError):
            posterior([[0.1], [0.2]], [0.0, 1.0], h)


class TestUcb:
    def test_zero_beta_is_mean(self, rng):
        X = rng.uniform(size=(5, 1))
        post = posterior(X, rng.normal(size=5), unit(0.1))
        assert ucb(post, [0.4], 0.0) == pytest.approx(mean_var(post, [0.4])[0], abs=1e-15)

    def test_prior(self):
        post = posterior(np.zeros((0, 1)), [], unit(0.1))
        assert ucb(post, [0.4], 1.5) == pytest.approx(1.5)

    def test_one_point(self):
        post = posterior([[0.3]], [2.0], unit(1.0))
        assert 1 + 1.5 * math.sqrt(0.5) == pytest.approx(2.06066, abs=1e-5)
        assert ucb(post, [0.3], 1.5) == pytest.approx(1 + 1.5 * math.sqrt(0.5), abs=1e-12)


class TestFitting:
    def test_single_observation_returns_defaults(self):
        h = fit_hyperparams([[0.5]], [1.0])
        assert np.array_equal(h.lengthscales, [1.0])
        assert (h.signal_variance, h.noise_variance) == (1.0, 1e-2)

    def test_identical_inputs_keep_noise_off_floor(self, stream):
        h = fit_hyperparams([[0.5], [0.5]], [0.0, 1.0], stream)
        assert h.flag == "degenerate-inputs"
        assert h.noise_variance > 1e-4

    def test_hyperparams_within_bounds(self, rng, stream):
        X = rng.uniform(size=(30, 3))
        y = np.sin(5 * X[:, 0]) + X[:, 1]
        h = fit_hyperparams(X, (y - y.mean()) / y.std(), stream)
        assert np.all((h.lengthscales >= 1e-3 - 1e-12) & (h.lengthscales <= 1e3 + 1e-9))
        assert 1e-6 - 1e-15 <= h.noise_variance <= 1.0 + 1e-12

    def test_fitting_is_deterministic(self, rng):
        X = rng.uniform(size=(20, 2))
        y = np.cos(4 * X.sum(1))
        a = fit_hyperparams(X, y, SeedStream(5))
        b = fit_hyperparams(X, y, SeedStream(5))
        assert np.array_equal(a.to_log(), b.to_log())

    def test_best_restart_beats_default_start(self, rng, stream):
        X = rng.uniform(size=(25, 1))
        y = np.sin(12 * X[:, 0])
        y = (y - y.mean()) / y.std()
        h = fit_hyperparams(X, y, stream)
        assert log_marginal_likelihood(X, y, h) >= log_marginal_likelihood(
            X, y, GpHyperparams.default(1)) - 1e-9

    def test_recovers_lengthscale_of_gp_draw(self):
        true_ls = 0.2
        ratios = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            X = rng.uniform(size=(40, 1))
            K = matern52_numpy(X, X, np.array([true_ls]), 1.0) + 1e-4 * np.eye(40)
            y = np.linalg.cholesky(K) @ rng.normal(size=40)
            h = fit_hyperparams(X, y, SeedStream(seed))
            ratios.append(h.lengthscales[0] / true_ls)
        assert 0.5 <= np.median(ratios) <= 2.0

    def test_fit_gp_reuses_given_hyperparameters(self, rng):
        X = rng.uniform(size=(10, 2))
        y = rng.normal(size=10)
        h = GpHyperparams(np.array([0.3, 0.3]), 1.0, 1e-3)
        post = fit_gp(X, y, (np.zeros(2), np.ones(2)), hyper=h)
        assert post.hyper is h
