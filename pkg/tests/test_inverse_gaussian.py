"""Distributional checks of the inverse-Gaussian variate generator."""
import numpy as np
import pytest

from gsmreg import sample_inverse_gaussian

from oracles import (
    inverse_gaussian_pdf,
    kolmogorov_distance,
    quadrature_cdf,
    rejection_sample_inverse_gaussian,
)


def _draws(mu, lam, size, seed=0):
    rng = np.random.default_rng(seed)
    return sample_inverse_gaussian(np.full(size, mu), lam, rng)


class TestMoments:
    def test_huge_shape_degenerates_to_mean(self):
        x = _draws(1.0, 1e6, 10_000)
        assert abs(x.mean() - 1.0) < 0.01
        assert np.all(x > 0)

    def test_mean_and_variance_match_analytic(self):
        # mean mu, variance mu^3 / lam
        mu, lam, n = 2.0, 3.0, 100_000
        x = _draws(mu, lam, n, seed=7)
        se_mean = x.std(ddof=1) / np.sqrt(n)
        assert abs(x.mean() - mu) < 3 * se_mean
        var = x.var(ddof=1)
        target = mu**3 / lam
        # variance of the sample variance via fourth central moment
        m4 = np.mean((x - x.mean()) ** 4)
        se_var = np.sqrt((m4 - var**2) / n)
        assert abs(var - target) < 3 * se_var

    def test_against_rejection_sampler(self):
        mu, lam, n = 2.0, 3.0, 100_000
        x = _draws(mu, lam, n, seed=11)
        y = rejection_sample_inverse_gaussian(mu, lam, n, np.random.default_rng(13))
        se = np.hypot(x.std(ddof=1), y.std(ddof=1)) / np.sqrt(n)
        assert abs(x.mean() - y.mean()) < 3 * se


class TestDistribution:
    @pytest.mark.parametrize("mu,lam", [(0.5, 1.0), (2.0, 3.0), (1.0, 10.0)])
    def test_kolmogorov_distance_to_quadrature_cdf(self, mu, lam):
        n = 100_000
        x = _draws(mu, lam, n, seed=int(10 * mu + lam))
        grid, cdf = quadrature_cdf(
            lambda t: inverse_gaussian_pdf(t, mu, lam), 1e-9, mu * 60 + 60 / lam
        )
        assert kolmogorov_distance(x, grid, cdf) < 0.01


class TestInterface:
    def test_scalar_in_scalar_out(self):
        rng = np.random.default_rng(0)
        x = sample_inverse_gaussian(1.5, 2.0, rng)
        assert isinstance(x, float) and x > 0

    def test_domain_errors(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_inverse_gaussian(0.0, 1.0, rng)
        with pytest.raises(ValueError):
            sample_inverse_gaussian(1.0, -1.0, rng)
        with pytest.raises(ValueError):
            sample_inverse_gaussian(np.array([1.0, -0.5]), 1.0, rng)

    def test_vector_draws_strictly_positive(self):
        rng = np.random.default_rng(1)
        x = sample_inverse_gaussian(np.full(50_000, 0.01), 0.1, rng)
        assert np.all(x > 0) and np.all(np.isfinite(x))

    def test_extreme_mean_stable(self):
        # the clamp floor can push the conditional mean to ~1e6; draws must
        # stay positive and finite (no cancellation in the root formula)
        rng = np.random.default_rng(2)
        x = sample_inverse_gaussian(np.full(20_000, 1e6), 2.0, rng)
        assert np.all(x > 0) and np.all(np.isfinite(x))
