"""Core data containers and exact density/penalty evaluations.

All likelihood and prior evaluations are done in log space. The coefficient
prior is only available as an unnormalized kernel (its normalizing constant
has no closed form), so only log-density *differences* at fixed scale are
meaningful quantities.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "GroupStructure",
    "Dataset",
    "CoefficientMatrix",
    "MixingState",
    "Hyperparams",
    "ChainOutput",
    "log_likelihood",
    "pointwise_log_likelihood",
    "group_norms",
    "penalized_objective",
    "log_prior_kernel",
    "kernel_integral_bound",
]

STANDARDIZE_TOL = 1e-8


def _as_2d(name: str, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    return a


class GroupStructure:
    """Partition of SNP indices 0..d-1 into K disjoint, nonempty groups.

    Group labels are carried as strings (typically gene names from an input
    file); internal indices are dense and 0-based. Construction validates
    that the groups form a partition.
    """

    def __init__(self, index_sets: Sequence[np.ndarray], labels: Optional[Sequence[str]] = None):
        sets = [np.asarray(ix, dtype=np.int64).ravel() for ix in index_sets]
        if not sets:
            raise ValueError("at least one group is required")
        for k, ix in enumerate(sets):
            if ix.size == 0:
                raise ValueError(f"group {k} is empty")
        d = int(sum(ix.size for ix in sets))
        seen = np.zeros(d, dtype=bool)
        group_of = np.empty(d, dtype=np.int64)
        for k, ix in enumerate(sets):
            if np.any(ix < 0) or np.any(ix >= d):
                raise ValueError(f"group {k} has indices outside 0..{d - 1}")
            if np.any(seen[ix]):
                raise ValueError(f"group {k} overlaps another group")
            seen[ix] = True
            group_of[ix] = k
        if not np.all(seen):
            missing = np.nonzero(~seen)[0]
            raise ValueError(f"SNP indices not covered by any group: {missing.tolist()}")
        self.index_sets = tuple(sets)
        self.group_of = group_of
        self.sizes = np.array([ix.size for ix in sets], dtype=np.int64)
        if labels is None:
            labels = [f"g{k}" for k in range(len(sets))]
        if len(labels) != len(sets):
            raise ValueError("one label per group required")
        self.labels = tuple(str(s) for s in labels)

    @property
    def n_snps(self) -> int:
        return int(self.group_of.size)

    @property
    def n_groups(self) -> int:
        return len(self.index_sets)

    @classmethod
    def from_labels(cls, snp_genes: Sequence[str]) -> "GroupStructure":
        """Build from a per-SNP gene label, groups ordered by first appearance."""
        order: dict[str, list[int]] = {}
        for i, g in enumerate(snp_genes):
            order.setdefault(str(g), []).append(i)
        return cls([np.array(v) for v in order.values()], labels=list(order.keys()))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], labels: Optional[Sequence[str]] = None) -> "GroupStructure":
        """Contiguous groups of the given sizes."""
        edges = np.concatenate([[0], np.cumsum(np.asarray(sizes, dtype=np.int64))])
        return cls([np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])], labels=labels)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GroupStructure)
            and self.labels == other.labels
            and all(np.array_equal(a, b) for a, b in zip(self.index_sets, other.index_sets))
        )

    def __repr__(self) -> str:
        return f"GroupStructure(K={self.n_groups}, d={self.n_snps})"


@dataclass
class Dataset:
    """Genotype matrix X (n x d, minor-allele counts in {0,1,2}) plus
    phenotype matrix Y (n x c) and the SNP -> group partition.

    Missing genotypes are not supported; imputation happens upstream. When
    ``standardized`` is set, each phenotype column must have sample mean 0
    and sample variance 1 (ddof=1) within 1e-8.
    """

    X: np.ndarray
    Y: np.ndarray
    groups: GroupStructure
    snp_names: Optional[tuple[str, ...]] = None
    phenotype_names: Optional[tuple[str, ...]] = None
    standardized: bool = False

    def __post_init__(self):
        self.X = _as_2d("X", self.X)
        self.Y = _as_2d("Y", self.Y)
        n, d = self.X.shape
        if self.Y.shape[0] != n:
            raise ValueError(f"X has {n} subjects but Y has {self.Y.shape[0]}")
        if self.groups.n_snps != d:
            raise ValueError(f"groups cover {self.groups.n_snps} SNPs but X has {d} columns")
        if not np.isin(self.X, (0.0, 1.0, 2.0)).all():
            raise ValueError("genotype entries must be minor-allele counts in {0, 1, 2}")
        if self.snp_names is not None:
            self.snp_names = tuple(self.snp_names)
            if len(self.snp_names) != d:
                raise ValueError("snp_names length must equal d")
        if self.phenotype_names is not None:
            self.phenotype_names = tuple(self.phenotype_names)
            if len(self.phenotype_names) != self.Y.shape[1]:
                raise ValueError("phenotype_names length must equal c")
        if self.standardized and n > 1:
            mu = self.Y.mean(axis=0)
            v = self.Y.var(axis=0, ddof=1)
            if np.any(np.abs(mu) > STANDARDIZE_TOL) or np.any(np.abs(v - 1.0) > STANDARDIZE_TOL):
                raise ValueError("standardized flag set but Y columns are not mean-0 / variance-1")

    @property
    def n_subjects(self) -> int:
        return self.X.shape[0]

    @property
    def n_snps(self) -> int:
        return self.X.shape[1]

    @property
    def n_phenotypes(self) -> int:
        return self.Y.shape[1]


@dataclass
class CoefficientMatrix:
    """d x c coefficient matrix with group-block and SNP-row accessors."""

    W: np.ndarray
    groups: GroupStructure

    def __post_init__(self):
        self.W = _as_2d("W", self.W)
        if self.W.shape[0] != self.groups.n_snps:
            raise ValueError(f"W has {self.W.shape[0]} rows, groups cover {self.groups.n_snps}")

    def block(self, k: int) -> np.ndarray:
        """Rows of group k, in the group's index order (m_k x c)."""
        return self.W[self.groups.index_sets[k], :]

    def row(self, i: int) -> np.ndarray:
        return self.W[i, :]


@dataclass
class MixingState:
    """Latent scale variables: per-group tau2, per-SNP omega2, plus sigma2."""

    tau2: np.ndarray
    omega2: np.ndarray
    sigma2: float

    def __post_init__(self):
        self.tau2 = np.asarray(self.tau2, dtype=np.float64).ravel()
        self.omega2 = np.asarray(self.omega2, dtype=np.float64).ravel()
        self.sigma2 = float(self.sigma2)
        for name, v in (("tau2", self.tau2), ("omega2", self.omega2)):
            if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ValueError(f"{name} entries must be strictly positive and finite")
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError("sigma2 must be strictly positive and finite")


@dataclass(frozen=True)
class Hyperparams:
    """Shrinkage strengths (lambda1_sq, lambda2_sq) and the inverse-Gamma
    shape/scale (a_sigma, b_sigma) for the noise variance prior."""

    lambda1_sq: float
    lambda2_sq: float
    a_sigma: float = 1.0
    b_sigma: float = 1.0

    def __post_init__(self):
        for name in ("lambda1_sq", "lambda2_sq", "a_sigma", "b_sigma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be strictly positive, got {v}")

    @property
    def lambda1(self) -> float:
        return float(np.sqrt(self.lambda1_sq))

    @property
    def lambda2(self) -> float:
        return float(np.sqrt(self.lambda2_sq))


@dataclass
class ChainOutput:
    """Thinned post-burn-in draws plus per-draw per-subject log-likelihoods.

    ``W`` has shape (S, d, c), ``sigma2`` shape (S,), ``log_lik`` shape
    (S, n); rows of ``log_lik`` correspond one-to-one to the stored draws.
    """

    W: np.ndarray
    sigma2: np.ndarray
    log_lik: np.ndarray
    seed: int
    iterations: int
    burn_in: int
    thin: int
    lambda1_sq: float
    lambda2_sq: float
    snp_names: Optional[tuple[str, ...]] = None
    phenotype_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64).ravel()
        self.log_lik = np.asarray(self.log_lik, dtype=np.float64)
        expected = (self.iterations - self.burn_in) // self.thin
        if self.W.ndim != 3:
            raise ValueError("W draws must have shape (S, d, c)")
        S = self.W.shape[0]
        if S != expected:
            raise ValueError(f"stored {S} draws, expected ({self.iterations} - {self.burn_in}) // {self.thin} = {expected}")
        if self.sigma2.shape[0] != S or self.log_lik.shape[0] != S:
            raise ValueError("sigma2 and log_lik must hold one row per stored draw")

    @property
    def n_draws(self) -> int:
        return self.W.shape[0]

    def posterior_mean_W(self) -> np.ndarray:
        return self.W.mean(axis=0)

    def posterior_mean_sigma2(self) -> float:
        return float(self.sigma2.mean())


def _check_regression_shapes(Y: np.ndarray, X: np.ndarray, W: np.ndarray):
    Y = _as_2d("Y", Y)
    X = _as_2d("X", X)
    W = _as_2d("W", W)
    n, d = X.shape
    if Y.shape[0] != n or W.shape != (d, Y.shape[1]):
        raise ValueError(
            f"inconsistent shapes: X {X.shape}, Y {Y.shape}, W {W.shape} "
            f"(need X (n,d), Y (n,c), W (d,c))"
        )
    return Y, X, W


def log_likelihood(Y: np.ndarray, X: np.ndarray, W: np.ndarray, sigma2: float) -> float:
    """Gaussian log-likelihood of Y given mean XW and covariance sigma2*I per row.

    Equals -(nc/2) log(2 pi sigma2) - ||Y - XW||_F^2 / (2 sigma2).
    """
    Y, X, W = _check_regression_shapes(Y, X, W)
    if not np.isfinite(sigma2) or sigma2 <= 0:
        raise ValueError(f"sigma2 must be strictly positive, got {sigma2}")
    n, c = Y.shape
    R = Y - X @ W
    rss = float(np.einsum("ij,ij->", R, R))
    return -0.5 * n * c * np.log(2.0 * np.pi * sigma2) - rss / (2.0 * sigma2)


def pointwise_log_likelihood(Y: np.ndarray, X: np.ndarray, W: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-subject log density, length n. Sums to ``log_likelihood``."""
    Y, X, W = _check_regression_shapes(Y, X, W)
    if not np.isfinite(sigma2) or sigma2 <= 0:
        raise ValueError(f"sigma2 must be strictly positive, got {sigma2}")
    c = Y.shape[1]
    R = Y - X @ W
    return -0.5 * c * np.log(2.0 * np.pi * sigma2) - np.einsum("ij,ij->i", R, R) / (2.0 * sigma2)


def group_norms(W: np.ndarray, groups: GroupStructure) -> tuple[float, float]:
    """Return (G21, L21): the group-wise and row-wise sums of Frobenius norms.

    G21 = sum_k ||W^(k)||_F penalizes whole gene blocks; L21 = sum_i ||w^i||_2
    penalizes single SNP rows across all phenotypes.
    """
    W = _as_2d("W", W)
    if W.shape[0] != groups.n_snps:
        raise ValueError(f"W has {W.shape[0]} rows but groups cover {groups.n_snps}")
    row_sq = np.einsum("ij,ij->i", W, W)
    block_sq = np.bincount(groups.group_of, weights=row_sq, minlength=groups.n_groups)
    g21 = float(np.sqrt(block_sq).sum())
    l21 = float(np.sqrt(row_sq).sum())
    return g21, l21


def penalized_objective(
    W: np.ndarray,
    Y: np.ndarray,
    X: np.ndarray,
    groups: GroupStructure,
    gamma1: float,
    gamma2: float,
) -> float:
    """Residual sum of squares plus gamma1*G21 + gamma2*L21."""
    Y, X, W = _check_regression_shapes(Y, X, W)
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    R = Y - X @ W
    rss = float(np.einsum("ij,ij->", R, R))
    g21, l21 = group_norms(W, groups)
    return rss + gamma1 * g21 + gamma2 * l21


def log_prior_kernel(
    W: np.ndarray,
    groups: GroupStructure,
    lambda1: float,
    lambda2: float,
    sigma: float,
) -> float:
    """Unnormalized log prior of W at scale sigma:
    -(lambda1/sigma) G21 - (lambda2/sigma) L21.

    The normalizing constant depends on sigma and is not exposed; only
    differences at fixed (lambda1, lambda2, sigma) are contract-bearing.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("lambda1 and lambda2 must be nonnegative")
    if not np.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"sigma must be strictly positive, got {sigma}")
    g21, l21 = group_norms(W, groups)
    return -(lambda1 / sigma) * g21 - (lambda2 / sigma) * l21


def kernel_integral_bound(block_size: int, n_tasks: int, lambda1: float, sigma: float) -> float:
    """Finite upper bound on the integral of one group's prior kernel over
    its m_k*c coefficients:

        pi^((mc-1)/2) * Gamma((mc+1)/2) * 2^(mc) * (lambda1^2/sigma^2)^(-mc/2)

    Computed in log space to avoid overflow in the Gamma factor. Test-suite
    support for verifying the prior integrates finitely.
    """
    if block_size <= 0 or n_tasks <= 0:
        raise ValueError("block_size and n_tasks must be positive")
    if lambda1 <= 0 or sigma <= 0:
        raise ValueError("lambda1 and sigma must be positive")
    mc = block_size * n_tasks
    log_bound = (
        0.5 * (mc - 1) * np.log(np.pi)
        + gammaln(0.5 * (mc + 1))
        + mc * np.log(2.0)
        - 0.5 * mc * np.log(lambda1**2 / sigma**2)
    )
    with np.errstate(over="ignore"):
        # finite in log space; may round to inf only past the float range
        return float(np.exp(log_bound))
