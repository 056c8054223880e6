"""Exact-value and property tests for the core densities and penalties."""
import numpy as np
import pytest
from scipy import integrate

from gsmreg import (
    ChainOutput,
    CoefficientMatrix,
    Dataset,
    GroupStructure,
    Hyperparams,
    MixingState,
    group_norms,
    kernel_integral_bound,
    log_likelihood,
    log_prior_kernel,
    penalized_objective,
    pointwise_log_likelihood,
)


class TestGroupStructure:
    def test_partition_valid(self):
        g = GroupStructure([np.array([0, 2]), np.array([1])])
        assert g.n_snps == 3 and g.n_groups == 2
        assert g.group_of.tolist() == [0, 1, 0]
        assert g.sizes.tolist() == [2, 1]

    def test_from_labels_first_appearance_order(self):
        g = GroupStructure.from_labels(["APOE", "ACE", "APOE", "ACE", "ACE"])
        assert g.labels == ("APOE", "ACE")
        assert g.index_sets[0].tolist() == [0, 2]
        assert g.index_sets[1].tolist() == [1, 3, 4]

    @pytest.mark.parametrize(
        "sets",
        [
            [np.array([0, 1]), np.array([1, 2])],   # overlap
            [np.array([0]), np.array([2])],          # gap
            [np.array([0, 1]), np.array([], dtype=int)],  # empty group
        ],
    )
    def test_invalid_partitions_rejected(self, sets):
        with pytest.raises(ValueError):
            GroupStructure(sets)

    def test_group_of_matches_membership(self):
        rng = np.random.default_rng(0)
        perm = rng.permutation(10)
        g = GroupStructure([perm[:4], perm[4:5], perm[5:]])
        for k, idx in enumerate(g.index_sets):
            assert np.all(g.group_of[idx] == k)
        assert g.sizes.sum() == 10


class TestDataset:
    def test_rejects_non_count_genotypes(self):
        groups = GroupStructure.from_sizes([2])
        with pytest.raises(ValueError, match="minor-allele"):
            Dataset(X=np.array([[0.0, 1.5]]), Y=np.zeros((1, 1)), groups=groups)

    def test_rejects_dimension_mismatch(self):
        groups = GroupStructure.from_sizes([3])
        with pytest.raises(ValueError):
            Dataset(X=np.zeros((4, 2)), Y=np.zeros((4, 1)), groups=groups)

    def test_standardized_flag_enforced(self):
        groups = GroupStructure.from_sizes([1])
        X = np.ones((3, 1))
        with pytest.raises(ValueError, match="standardized"):
            Dataset(X=X, Y=np.array([[5.0], [6.0], [7.0]]), groups=groups, standardized=True)
        y = np.array([-1.0, 0.0, 1.0]) / np.std([-1.0, 0.0, 1.0], ddof=1)
        Dataset(X=X, Y=y.reshape(-1, 1), groups=groups, standardized=True)


class TestCoefficientMatrix:
    def test_block_and_row_views_consistent(self):
        rng = np.random.default_rng(3)
        groups = GroupStructure([np.array([2, 0]), np.array([1, 3])])
        W = rng.standard_normal((4, 3))
        cm = CoefficientMatrix(W=W, groups=groups)
        blk = cm.block(0)
        assert blk.shape == (2, 3)
        np.testing.assert_array_equal(blk[0], W[2])
        np.testing.assert_array_equal(blk[1], W[0])
        np.testing.assert_array_equal(cm.row(3), W[3])


class TestMixingState:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            MixingState(tau2=[1.0, 0.0], omega2=[1.0], sigma2=1.0)
        with pytest.raises(ValueError):
            MixingState(tau2=[1.0], omega2=[1.0], sigma2=-2.0)
        with pytest.raises(ValueError):
            MixingState(tau2=[np.inf], omega2=[1.0], sigma2=1.0)


class TestChainOutput:
    def test_draw_count_bookkeeping(self):
        with pytest.raises(ValueError, match="expected"):
            ChainOutput(
                W=np.zeros((4, 1, 1)), sigma2=np.ones(4), log_lik=np.zeros((4, 2)),
                seed=0, iterations=10, burn_in=5, thin=1,
                lambda1_sq=1.0, lambda2_sq=1.0,
            )
        ChainOutput(
            W=np.zeros((5, 1, 1)), sigma2=np.ones(5), log_lik=np.zeros((5, 2)),
            seed=0, iterations=10, burn_in=5, thin=1,
            lambda1_sq=1.0, lambda2_sq=1.0,
        )


class TestLogLikelihood:
    def test_standard_normal_at_zero(self):
        val = log_likelihood(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), 1.0)
        assert val == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-15)

    def test_zero_coefficients_reduce_to_frobenius(self):
        rng = np.random.default_rng(1)
        Y = rng.standard_normal((7, 3))
        X = rng.integers(0, 3, (7, 4)).astype(float)
        s2 = 1.7
        expect = -0.5 * 21 * np.log(2 * np.pi * s2) - np.sum(Y**2) / (2 * s2)
        assert log_likelihood(Y, X, np.zeros((4, 3)), s2) == pytest.approx(expect, rel=1e-14)

    def test_matches_entrywise_density_sum(self):
        # brute force: every response entry is an independent normal
        rng = np.random.default_rng(2)
        X = rng.integers(0, 3, (3, 2)).astype(float)
        W = rng.standard_normal((2, 2))
        Y = rng.standard_normal((3, 2))
        s2 = 0.73
        mean = X @ W
        brute = sum(
            -0.5 * np.log(2 * np.pi * s2) - (Y[l, j] - mean[l, j]) ** 2 / (2 * s2)
            for l in range(3)
            for j in range(2)
        )
        assert log_likelihood(Y, X, W, s2) == pytest.approx(brute, rel=1e-12)
        np.testing.assert_allclose(
            pointwise_log_likelihood(Y, X, W, s2).sum(),
            log_likelihood(Y, X, W, s2),
            rtol=1e-12,
        )

    def test_shape_and_domain_errors(self):
        with pytest.raises(ValueError, match="shapes"):
            log_likelihood(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((3, 2)), 1.0)
        with pytest.raises(ValueError, match="sigma2"):
            log_likelihood(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), 0.0)


class TestGroupNorms:
    def test_zero_matrix(self):
        groups = GroupStructure.from_sizes([2])
        assert group_norms(np.zeros((2, 1)), groups) == (0.0, 0.0)

    def test_three_four_five(self):
        groups = GroupStructure.from_sizes([2])
        g21, l21 = group_norms(np.array([[3.0], [4.0]]), groups)
        assert g21 == pytest.approx(5.0, abs=1e-14)
        assert l21 == pytest.approx(7.0, abs=1e-14)

    def test_singleton_groups_collapse(self):
        rng = np.random.default_rng(4)
        W = rng.standard_normal((2, 2))
        groups = GroupStructure.from_sizes([1, 1])
        g21, l21 = group_norms(W, groups)
        assert g21 == pytest.approx(l21, rel=1e-14)

    def test_single_group_is_frobenius(self):
        rng = np.random.default_rng(5)
        W = rng.standard_normal((6, 3))
        g21, _ = group_norms(W, GroupStructure.from_sizes([6]))
        assert g21 == pytest.approx(np.linalg.norm(W, "fro"), rel=1e-14)

    def test_absolute_homogeneity(self):
        rng = np.random.default_rng(6)
        groups = GroupStructure.from_sizes([3, 2, 4])
        W = rng.standard_normal((9, 2))
        for alpha in (-2.5, 0.3, 7.0):
            g, l = group_norms(alpha * W, groups)
            g0, l0 = group_norms(W, groups)
            assert g == pytest.approx(abs(alpha) * g0, rel=1e-12)
            assert l == pytest.approx(abs(alpha) * l0, rel=1e-12)


class TestPenalizedObjective:
    def test_penalty_free_is_rss(self):
        rng = np.random.default_rng(7)
        X = rng.integers(0, 3, (6, 3)).astype(float)
        Y = rng.standard_normal((6, 2))
        W = rng.standard_normal((3, 2))
        groups = GroupStructure.from_sizes([3])
        rss = np.sum((Y - X @ W) ** 2)
        assert penalized_objective(W, Y, X, groups, 0.0, 0.0) == pytest.approx(rss, rel=1e-13)

    def test_zero_coefficients(self):
        rng = np.random.default_rng(8)
        Y = rng.standard_normal((5, 2))
        X = rng.integers(0, 3, (5, 4)).astype(float)
        groups = GroupStructure.from_sizes([4])
        assert penalized_objective(np.zeros((4, 2)), Y, X, groups, 3.0, 4.0) == pytest.approx(
            np.sum(Y**2), rel=1e-13
        )

    def test_assembles_from_independent_norms(self):
        # norms recomputed with plain loops, no shared code
        rng = np.random.default_rng(9)
        groups = GroupStructure.from_sizes([2, 3])
        X = rng.integers(0, 3, (8, 5)).astype(float)
        Y = rng.standard_normal((8, 2))
        W = rng.standard_normal((5, 2))
        g21 = sum(
            np.sqrt(sum(W[i, j] ** 2 for i in idx for j in range(2)))
            for idx in groups.index_sets
        )
        l21 = sum(np.sqrt(sum(W[i, j] ** 2 for j in range(2))) for i in range(5))
        rss = np.sum((Y - X @ W) ** 2)
        assert penalized_objective(W, Y, X, groups, 1.3, 0.4) == pytest.approx(
            rss + 1.3 * g21 + 0.4 * l21, rel=1e-12
        )


class TestLogPriorKernel:
    def test_zero_matrix_is_zero(self):
        groups = GroupStructure.from_sizes([2, 1])
        assert log_prior_kernel(np.zeros((3, 2)), groups, 1.0, 2.0, 1.5) == 0.0

    def test_univariate_double_exponential(self):
        groups = GroupStructure.from_sizes([1])
        w, l1, l2, sigma = -1.3, 0.7, 1.9, 2.0
        expect = -(l1 + l2) * abs(w) / sigma
        assert log_prior_kernel(np.array([[w]]), groups, l1, l2, sigma) == pytest.approx(
            expect, rel=1e-14
        )

    def test_direct_substitution(self):
        groups = GroupStructure.from_sizes([2])
        W = np.array([[3.0], [4.0]])  # frobenius 5
        assert log_prior_kernel(W, groups, 2.0, 0.0, 1.0) == pytest.approx(-10.0, abs=1e-12)

    def test_domain_error(self):
        groups = GroupStructure.from_sizes([1])
        with pytest.raises(ValueError):
            log_prior_kernel(np.ones((1, 1)), groups, 1.0, 1.0, 0.0)


class TestKernelIntegralBound:
    def test_direct_values(self):
        assert kernel_integral_bound(1, 1, 2.0, 1.0) == pytest.approx(1.0, rel=1e-12)
        assert kernel_integral_bound(1, 1, 1.0, 1.0) == pytest.approx(2.0, rel=1e-12)
        assert kernel_integral_bound(1, 2, 1.0, 1.0) == pytest.approx(2 * np.pi, rel=1e-12)

    def test_planar_quadrature(self):
        # integral of exp(-||w||_2) over the plane
        val, _ = integrate.dblquad(
            lambda y, x: np.exp(-np.hypot(x, y)), -40, 40, -40, 40
        )
        assert val == pytest.approx(kernel_integral_bound(1, 2, 1.0, 1.0), rel=1e-6)

    def test_large_arguments_stay_finite(self):
        assert np.isfinite(kernel_integral_bound(60, 50, 0.5, 1.0)) or \
            kernel_integral_bound(60, 50, 0.5, 1.0) == np.inf
        # the log-space path must not raise
        kernel_integral_bound(200, 100, 2.0, 1.0)

    def test_univariate_kernel_mass_below_bound(self):
        sigma, l1, l2 = 1.4, 0.8, 0.5
        mass, _ = integrate.quad(lambda w: np.exp(-(l1 + l2) * abs(w) / sigma), -np.inf, np.inf)
        assert mass == pytest.approx(2 * sigma / (l1 + l2), rel=1e-10)
        assert mass <= kernel_integral_bound(1, 1, l1, sigma)

    def test_planar_kernel_mass_matches_bound_when_row_penalty_off(self):
        sigma, l1 = 0.9, 1.7
        val, _ = integrate.dblquad(
            lambda y, x: np.exp(-l1 * np.hypot(x, y) / sigma), -60, 60, -60, 60
        )
        assert val == pytest.approx(2 * np.pi * sigma**2 / l1**2, rel=1e-6)
        assert val == pytest.approx(kernel_integral_bound(1, 2, l1, sigma), rel=1e-6)


class TestPosteriorModeIdentity:
    def test_log_posterior_difference_equals_scaled_objective_difference(self):
        # gamma = 2 sigma lambda makes the two parameterizations agree on
        # log-density differences at fixed scale
        rng = np.random.default_rng(10)
        groups = GroupStructure.from_sizes([2, 3, 1])
        X = rng.integers(0, 3, (12, 6)).astype(float)
        Y = rng.standard_normal((12, 3))
        for _ in range(50):
            l1, l2 = rng.uniform(0.1, 3.0, 2)
            sigma2 = rng.uniform(0.3, 4.0)
            sigma = np.sqrt(sigma2)
            g1, g2 = 2 * sigma * l1, 2 * sigma * l2
            W1 = rng.standard_normal((6, 3))
            W2 = rng.standard_normal((6, 3))
            lhs = (
                log_likelihood(Y, X, W1, sigma2)
                + log_prior_kernel(W1, groups, l1, l2, sigma)
                - log_likelihood(Y, X, W2, sigma2)
                - log_prior_kernel(W2, groups, l1, l2, sigma)
            )
            rhs = -(
                penalized_objective(W1, Y, X, groups, g1, g2)
                - penalized_objective(W2, Y, X, groups, g1, g2)
            ) / (2 * sigma2)
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


class TestHyperparams:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Hyperparams(lambda1_sq=0.0, lambda2_sq=1.0)
        with pytest.raises(ValueError):
            Hyperparams(lambda1_sq=1.0, lambda2_sq=1.0, b_sigma=-1.0)

    def test_sqrt_accessors(self):
        h = Hyperparams(lambda1_sq=4.0, lambda2_sq=9.0)
        assert h.lambda1 == 2.0 and h.lambda2 == 3.0
