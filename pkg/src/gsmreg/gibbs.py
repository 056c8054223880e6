"""Blocked Gibbs sampler for the group-sparse multi-task regression model.

One sweep updates, in fixed order: the noise variance sigma2 from its
inverse-Gamma conditional, the reciprocal group scales 1/tau2_k and row
scales 1/omega2_i from inverse-Gaussian conditionals, and then each
coefficient block from its exact multivariate-normal conditional.

The block conditional has precision (S_k + D_k) (x) I_c / sigma2, so a draw
costs one m_k x m_k Cholesky applied to c right-hand sides; the (m_k c)^2
matrix is never formed. A single chain is strictly sequential; independent
chains (different tuning pairs or seeds) share no mutable state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from .model import ChainOutput, Dataset, GroupStructure, Hyperparams, MixingState

__all__ = [
    "SamplerConfig",
    "GramCache",
    "sample_inverse_gaussian",
    "update_sigma2",
    "update_tau2",
    "update_omega2",
    "update_coefficient_block",
    "block_conditional_moments",
    "run_gibbs",
]

logger = logging.getLogger(__name__)

DEFAULT_NUMERIC_FLOOR = 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length bookkeeping, seed, initialization and the norm clamp.

    ``init`` is "zeros" (coefficients at zero, unit mixing scales),
    "penalized" (warm start at the penalized point estimate with
    gamma_i = 2 sqrt(lambda_i^2)), or an explicit (d, c) array. The number
    of stored draws is (iterations - burn_in) // thin; a remainder is
    truncated deterministically.
    """

    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    init: Union[str, np.ndarray] = "zeros"
    numeric_floor: float = DEFAULT_NUMERIC_FLOOR

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin <= 0:
            raise ValueError("thin must be positive")
        if self.numeric_floor <= 0:
            raise ValueError("numeric_floor must be positive")
        if isinstance(self.init, str) and self.init not in ("zeros", "penalized"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


class GramCache:
    """Precomputed group-contiguous views of one dataset.

    Holds the transposed genotype matrix with group rows adjacent, the
    per-group Gram blocks S_k = X_k^T X_k packed flat, the phenotype
    cross-products C_k = X_k^T Y, and the permutation between input SNP
    order and the internal layout. Pure function of (X, Y, groups).
    """

    def __init__(self, X: np.ndarray, Y: np.ndarray, groups: GroupStructure):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ValueError(f"incompatible X {X.shape} / Y {Y.shape}")
        if groups.n_snps != X.shape[1]:
            raise ValueError("groups do not match X columns")
        self.groups = groups
        self.perm = np.concatenate(groups.index_sets).astype(np.int64)
        self.inv_perm = np.argsort(self.perm)
        sizes = groups.sizes
        self.starts = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.Xt = np.ascontiguousarray(X.T[self.perm])
        self.Y = Y
        self.s_off = np.concatenate([[0], np.cumsum(sizes**2)])[:-1].astype(np.int64)
        packed = np.empty(int(np.sum(sizes**2)))
        cross = np.empty((groups.n_snps, Y.shape[1]))
        for k in range(groups.n_groups):
            a, b = self.starts[k], self.starts[k + 1]
            Xk = self.Xt[a:b]
            packed[self.s_off[k]:self.s_off[k] + (b - a) ** 2] = (Xk @ Xk.T).ravel()
            cross[a:b] = Xk @ Y
        self.S_packed = packed
        self.C = cross
        self.max_block = int(sizes.max())

    @classmethod
    def from_dataset(cls, data: Dataset) -> "GramCache":
        return cls(data.X, data.Y, data.groups)

    @property
    def n_subjects(self) -> int:
        return self.Xt.shape[1]

    @property
    def n_snps(self) -> int:
        return self.Xt.shape[0]

    @property
    def n_phenotypes(self) -> int:
        return self.Y.shape[1]

    def block_gram(self, k: int) -> np.ndarray:
        m = int(self.groups.sizes[k])
        return self.S_packed[self.s_off[k]:self.s_off[k] + m * m].reshape(m, m)

    def residual_t(self, W_perm: np.ndarray) -> np.ndarray:
        """(c, n) residual for coefficients given in the cache's row order."""
        return np.ascontiguousarray(self.Y.T - W_perm.T @ self.Xt)


def sample_inverse_gaussian(mu, lam, rng: np.random.Generator):
    """Draw from Inverse-Gaussian(mean=mu, shape=lam), elementwise over mu.

    Uses the squared-normal transformation with root selection by a
    uniform draw: exact and constant-time, no rejection loop. Scalar mu
    gives a scalar; an array gives one draw per element (each consuming
    one normal and one uniform, in element order).
    """
    lam = float(lam)
    if lam <= 0:
        raise ValueError(f"shape parameter must be positive, got {lam}")
    mu_arr = np.asarray(mu, dtype=np.float64)
    if np.any(mu_arr <= 0) or not np.all(np.isfinite(mu_arr)):
        raise ValueError("mean parameter must be strictly positive and finite")
    if mu_arr.ndim == 0:
        return float(_kernels.ig_draw_scalar(rng, float(mu_arr), lam))
    out = np.empty(mu_arr.shape[0])
    _kernels.ig_draw_vector(rng, np.ascontiguousarray(mu_arr), lam, out)
    return out


def update_sigma2(
    W: np.ndarray,
    mixing: MixingState,
    data: Dataset,
    hyper: Hyperparams,
    rng: np.random.Generator,
) -> float:
    """Draw sigma2 from its inverse-Gamma conditional.

    Shape is (c/2)(n + d) + a_sigma; scale is half the residual sum of
    squares plus half the precision-weighted squared coefficients plus
    b_sigma.
    """
    n, c = data.Y.shape
    d = data.n_snps
    R = data.Y - data.X @ W
    rss = float(np.einsum("ij,ij->", R, R))
    row_sq = np.einsum("ij,ij->i", W, W)
    prec = 1.0 / mixing.tau2[data.groups.group_of] + 1.0 / mixing.omega2
    a_star = 0.5 * c * (n + d) + hyper.a_sigma
    b_star = 0.5 * rss + 0.5 * float(prec @ row_sq) + hyper.b_sigma
    return 1.0 / float(rng.gamma(a_star, 1.0 / b_star))


def sigma2_conditional_params(
    W: np.ndarray, mixing: MixingState, data: Dataset, hyper: Hyperparams
) -> tuple[float, float]:
    """(shape, scale) of the sigma2 conditional, without drawing."""
    n, c = data.Y.shape
    d = data.n_snps
    R = data.Y - data.X @ W
    rss = float(np.einsum("ij,ij->", R, R))
    row_sq = np.einsum("ij,ij->i", W, W)
    prec = 1.0 / mixing.tau2[data.groups.group_of] + 1.0 / mixing.omega2
    return 0.5 * c * (n + d) + hyper.a_sigma, 0.5 * rss + 0.5 * float(prec @ row_sq) + hyper.b_sigma


def update_tau2(
    W: np.ndarray,
    k: int,
    groups: GroupStructure,
    sigma2: float,
    hyper: Hyperparams,
    rng: np.random.Generator,
    numeric_floor: float = DEFAULT_NUMERIC_FLOOR,
) -> float:
    """Draw tau2_k as the reciprocal of an inverse-Gaussian draw with mean
    sqrt(lambda1^2 sigma2 / ||W^(k)||_F^2) and shape lambda1^2.

    A block norm below ``numeric_floor`` is clamped there; the zero-norm
    event has probability zero along the chain but occurs under zero
    initialization.
    """
    block = W[groups.index_sets[k], :]
    fro2 = max(float(np.einsum("ij,ij->", block, block)), numeric_floor)
    mu = np.sqrt(hyper.lambda1_sq * sigma2 / fro2)
    return 1.0 / sample_inverse_gaussian(mu, hyper.lambda1_sq, rng)


def update_omega2(
    W: np.ndarray,
    i: int,
    sigma2: float,
    hyper: Hyperparams,
    rng: np.random.Generator,
    numeric_floor: float = DEFAULT_NUMERIC_FLOOR,
) -> float:
    """Draw omega2_i; as ``update_tau2`` with the row norm and lambda2^2."""
    row2 = max(float(W[i] @ W[i]), numeric_floor)
    mu = np.sqrt(hyper.lambda2_sq * sigma2 / row2)
    return 1.0 / sample_inverse_gaussian(mu, hyper.lambda2_sq, rng)


def block_conditional_moments(
    cache: GramCache,
    k: int,
    W_perm: np.ndarray,
    Rt: np.ndarray,
    tau2_k: float,
    omega2_perm: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Conditional moments of coefficient block k in matrix form.

    Returns (mean, M) where mean is the m_k x c conditional mean and
    M = S_k + D_k is the precision basis: the stacked block has precision
    M (x) I_c / sigma2, i.e. covariance sigma2 * (M^{-1} (x) I_c).
    ``W_perm``, ``Rt`` and ``omega2_perm`` are in the cache's row order.
    """
    i0, i1 = int(cache.starts[k]), int(cache.starts[k + 1])
    m = i1 - i0
    c = Rt.shape[0]
    rhs = np.empty((m, c))
    _kernels.block_rhs(cache.Xt, Rt, W_perm, cache.S_packed, int(cache.s_off[k]), i0, m, rhs)
    M = np.empty((m, m))
    _kernels.block_precision(cache.S_packed, int(cache.s_off[k]), i0, m, tau2_k, omega2_perm, M)
    return np.linalg.solve(M, rhs), M


def update_coefficient_block(
    cache: GramCache,
    k: int,
    W_perm: np.ndarray,
    Rt: np.ndarray,
    tau2_k: float,
    omega2_perm: np.ndarray,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Redraw block k in place (rows of ``W_perm`` and the residual ``Rt``).

    The draw is mean + sigma * L^{-T} Z with M = L L^T, realized as
    L^{-T}(L^{-1} rhs + sigma Z): an exact reparameterization of the block
    conditional. Returns the new m_k x c block.
    """
    i0, i1 = int(cache.starts[k]), int(cache.starts[k + 1])
    m = i1 - i0
    v = np.empty((m, Rt.shape[0]))
    M = np.empty((cache.max_block, cache.max_block))
    r = _kernels.update_block(
        rng, cache.Xt, Rt, W_perm, cache.S_packed, int(cache.s_off[k]), i0, m,
        float(tau2_k), omega2_perm, float(sigma2), v, M,
    )
    if r < 0:
        raise np.linalg.LinAlgError(f"block {k}: Cholesky failed even with jitter")
    if r > 0:
        logger.warning("block %d: Cholesky retried with diagonal jitter", k)
    return W_perm[i0:i1].copy()


def _initial_W(data: Dataset, hyper: Hyperparams, config: SamplerConfig) -> np.ndarray:
    d, c = data.n_snps, data.n_phenotypes
    if isinstance(config.init, np.ndarray):
        W0 = np.asarray(config.init, dtype=np.float64)
        if W0.shape != (d, c):
            raise ValueError(f"init array has shape {W0.shape}, want {(d, c)}")
        return W0.copy()
    if config.init == "penalized":
        from .penalized import fit_penalized

        # gamma = 2 sigma lambda at the unit-scale starting sigma
        fit = fit_penalized(
            data.X, data.Y, data.groups,
            gamma1=2.0 * hyper.lambda1, gamma2=2.0 * hyper.lambda2,
        )
        return fit.W
    return np.zeros((d, c))


def run_gibbs(data: Dataset, hyper: Hyperparams, config: SamplerConfig) -> ChainOutput:
    """Run one chain and return thinned post-burn-in draws.

    Deterministic given (data, hyper, config.seed): the draw sequence is a
    fixed function of the generator stream. Stores per-draw per-subject log
    densities alongside the draws so information criteria never need a
    second likelihood pass.
    """
    cache = GramCache.from_dataset(data)
    rng = np.random.default_rng(config.seed)
    n, d, c = data.n_subjects, data.n_snps, data.n_phenotypes
    K = data.groups.n_groups

    W0 = _initial_W(data, hyper, config)
    W = np.ascontiguousarray(W0[cache.perm])
    Rt = cache.residual_t(W)
    tau2 = np.ones(K)
    omega2 = np.ones(d)
    sigma2 = 1.0

    S = config.n_draws
    W_draws = np.empty((S, d, c))
    sigma2_draws = np.empty(S)
    log_lik = np.empty((S, n))

    v = np.empty((cache.max_block, c))
    M = np.empty((cache.max_block, cache.max_block))
    row_sq = np.empty(d)
    jitter_total = 0
    stored = 0
    for t in range(1, config.iterations + 1):
        sigma2, jitter = _kernels.sweep(
            rng, cache.Xt, Rt, W, tau2, omega2, sigma2,
            cache.starts, cache.S_packed, cache.s_off,
            hyper.lambda1_sq, hyper.lambda2_sq, hyper.a_sigma, hyper.b_sigma,
            config.numeric_floor, v, M, row_sq,
        )
        jitter_total += jitter
        if sigma2 < 0:
            raise RuntimeError(f"Gibbs update failed at iteration {t}: "
                               "block factorization not positive definite")
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0 and stored < S:
            W_draws[stored] = W[cache.inv_perm]
            sigma2_draws[stored] = sigma2
            _kernels.pointwise_loglik_from_residual(Rt, sigma2, log_lik[stored])
            stored += 1
    if jitter_total:
        logger.warning("chain seed=%d: %d block updates needed diagonal jitter",
                       config.seed, jitter_total)
    return ChainOutput(
        W=W_draws,
        sigma2=sigma2_draws,
        log_lik=log_lik,
        seed=config.seed,
        iterations=config.iterations,
        burn_in=config.burn_in,
        thin=config.thin,
        lambda1_sq=hyper.lambda1_sq,
        lambda2_sq=hyper.lambda2_sq,
        snp_names=data.snp_names,
        phenotype_names=data.phenotype_names,
    )
