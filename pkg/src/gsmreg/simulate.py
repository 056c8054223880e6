"""Synthetic ground truth, data generation and interval-coverage studies.

A study draws a sparse truth matrix, simulates phenotypes through the
regression model (Gaussian or heavy-tailed errors), fits each interval
method, and aggregates per-coefficient covers-the-truth indicators into
mean coverage probabilities, overall and over the active coefficients.
"""
from __future__ import annotations

import json
import warnings
import zlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.special import ndtr

from ._rng import derive_seed
from .gibbs import SamplerConfig, run_gibbs
from .model import Dataset, GroupStructure, Hyperparams
from .penalized import bootstrap_intervals, cv_select
from .report import credible_intervals
from .tuning import TuningGrid, grid_search

__all__ = [
    "StudyDesign",
    "CoverageTable",
    "MethodIntervals",
    "generate_genotypes",
    "draw_coefficients",
    "simulate_truth",
    "simulate_phenotypes",
    "run_study",
    "DEFAULT_METHODS",
]


def generate_genotypes(
    n: int,
    groups: GroupStructure,
    rng: np.random.Generator,
    maf_range: tuple[float, float] = (0.05, 0.5),
    ld_correlation: Optional[float] = 0.7,
) -> np.ndarray:
    """Minor-allele count matrix with Hardy-Weinberg marginals.

    Per-SNP allele frequencies are uniform on ``maf_range``. When
    ``ld_correlation`` is set, SNPs within a group share a Gaussian-copula
    equicorrelation, mimicking linkage blocks while preserving the
    {0, 1, 2} marginal distribution exactly.
    """
    d = groups.n_snps
    maf = rng.uniform(maf_range[0], maf_range[1], size=d)
    if ld_correlation is None or ld_correlation == 0.0:
        u = rng.random((n, d))
    else:
        rho = float(ld_correlation)
        if not 0.0 < rho < 1.0:
            raise ValueError(f"ld_correlation must be in (0, 1), got {rho}")
        z = np.empty((n, d))
        for idx in groups.index_sets:
            shared = rng.standard_normal((n, 1))
            own = rng.standard_normal((n, idx.size))
            z[:, idx] = np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own
        u = ndtr(z)
    # Hardy-Weinberg: P(0) = (1-p)^2, P(1) = 2p(1-p), P(2) = p^2
    p0 = (1.0 - maf) ** 2
    p01 = p0 + 2.0 * maf * (1.0 - maf)
    return ((u > p0).astype(np.float64) + (u > p01))


def draw_coefficients(
    groups: GroupStructure,
    tau2: np.ndarray,
    omega2: np.ndarray,
    sigma2: float,
    n_phenotypes: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw every w_ij ~ N(0, sigma2 / (1/tau2_{k(i)} + 1/omega2_i))."""
    prec = 1.0 / np.asarray(tau2)[groups.group_of] + 1.0 / np.asarray(omega2)
    sd = np.sqrt(sigma2 / prec)
    return rng.standard_normal((groups.n_snps, n_phenotypes)) * sd[:, None]


def simulate_truth(
    groups: GroupStructure,
    n_phenotypes: int,
    lambda1_sq: float,
    lambda2_sq: float,
    sigma2: float,
    active_genes: Sequence[int],
    extra_active_snps: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse truth: scale-mixture coefficients with most rows zeroed.

    Group scales come from Gamma((m_k c + 1)/2, rate lambda1_sq/2), row
    scales from Gamma((c + 1)/2, rate lambda2_sq/2); coefficients are then
    conditionally Gaussian. Rows outside the fully active genes and the
    ``extra_active_snps`` rows drawn from the remaining genes are set to
    exact zeros. Returns (W, active_row_indices).
    """
    K = groups.n_groups
    d = groups.n_snps
    c = n_phenotypes
    active_genes = sorted(set(int(g) for g in active_genes))
    for g in active_genes:
        if not 0 <= g < K:
            raise ValueError(f"active gene index {g} outside 0..{K - 1}")
    mk = groups.sizes
    # rate beta corresponds to scale 1/beta
    tau2 = rng.gamma((mk * c + 1) / 2.0, 2.0 / lambda1_sq)
    omega2 = rng.gamma((c + 1) / 2.0, 2.0 / lambda2_sq, size=d)
    W = draw_coefficients(groups, tau2, omega2, sigma2, c, rng)

    active = np.zeros(d, dtype=bool)
    for g in active_genes:
        active[groups.index_sets[g]] = True
    pool = np.nonzero(~active)[0]
    inactive_gene_pool = pool[~np.isin(groups.group_of[pool], active_genes)]
    if extra_active_snps > 0:
        if extra_active_snps > inactive_gene_pool.size:
            raise ValueError(
                f"cannot place {extra_active_snps} extra active SNPs in "
                f"{inactive_gene_pool.size} rows outside the active genes"
            )
        chosen = rng.choice(inactive_gene_pool, size=extra_active_snps, replace=False)
        active[chosen] = True
    W[~active, :] = 0.0
    return W, np.nonzero(active)[0]


def simulate_phenotypes(
    X: np.ndarray,
    W: np.ndarray,
    sigma2: float,
    family: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Y = XW + E with rows of E iid Gaussian or multivariate-t with 4 df.

    The t errors use scale matrix sigma2 * I (not variance-matched): their
    actual row variance is 2 * sigma2 since Var = scale * df/(df-2).
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    n = X.shape[0]
    c = W.shape[1]
    mean = X @ W
    if sigma2 == 0.0:
        return mean
    Z = rng.standard_normal((n, c)) * np.sqrt(sigma2)
    if family == "gaussian":
        return mean + Z
    if family == "student_t4":
        g = rng.chisquare(4.0, size=n)
        return mean + Z / np.sqrt(g / 4.0)[:, None]
    raise ValueError(f"unknown error family {family!r}")


@dataclass(frozen=True)
class StudyDesign:
    """Everything needed to reproduce one coverage study.

    ``bayes_tuning`` is "fixed" (fit at the generating lambda pair) or
    "grid" (re-select per replicate by the information criterion over
    ``bayes_grid``). The bootstrap always re-selects its penalty pair per
    replicate by cross-validation over ``cv_grid``.
    """

    name: str
    n: int
    c: int
    group_sizes: tuple[int, ...]
    active_genes: tuple[int, ...]
    extra_active_snps: int = 0
    error_family: str = "gaussian"
    lambda1_sq: float = 2.0
    lambda2_sq: float = 2.0
    sigma2: float = 2.0
    replicates: int = 100
    level: float = 0.95
    seed: int = 0
    maf_range: tuple[float, float] = (0.05, 0.5)
    ld_correlation: Optional[float] = 0.7
    # Bayesian fit
    iterations: int = 3000
    burn_in: int = 1000
    thin: int = 1
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    bayes_tuning: str = "grid"
    bayes_grid: tuple[tuple[float, float], ...] = ((0.2, 0.2), (2.0, 2.0), (20.0, 20.0))
    # bootstrap baseline
    bootstrap_replicates: int = 1000
    cv_grid: tuple[tuple[float, float], ...] = tuple(
        (10.0**a, 10.0**b) for a in range(-2, 3) for b in range(-2, 3)
    )
    cv_folds: int = 5
    # fixed genotype panel reused across replicates; None simulates fresh
    # genotypes per replicate
    genotypes_csv: Optional[str] = None

    def __post_init__(self):
        if self.error_family not in ("gaussian", "student_t4"):
            raise ValueError(f"unknown error family {self.error_family!r}")
        if self.bayes_tuning not in ("fixed", "grid"):
            raise ValueError(f"bayes_tuning must be 'fixed' or 'grid', got {self.bayes_tuning!r}")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates")
        if self.active_rows > self.d:
            raise ValueError("more active rows than SNPs")

    @property
    def d(self) -> int:
        return int(sum(self.group_sizes))

    @property
    def groups(self) -> GroupStructure:
        return GroupStructure.from_sizes(self.group_sizes)

    @property
    def active_rows(self) -> int:
        sizes = np.asarray(self.group_sizes)
        return int(sizes[list(self.active_genes)].sum()) + self.extra_active_snps

    @classmethod
    def from_dict(cls, spec: dict) -> "StudyDesign":
        spec = dict(spec)
        for key in ("group_sizes", "active_genes"):
            if key in spec:
                spec[key] = tuple(spec[key])
        for key in ("bayes_grid", "cv_grid"):
            if key in spec:
                spec[key] = tuple((float(a), float(b)) for a, b in spec[key])
        if "maf_range" in spec:
            spec["maf_range"] = tuple(spec["maf_range"])
        return cls(**spec)

    @classmethod
    def list_from_json(cls, path) -> list["StudyDesign"]:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if isinstance(payload, dict):
            payload = [payload]
        return [cls.from_dict(entry) for entry in payload]


@dataclass
class MethodIntervals:
    lower: np.ndarray  # d x c
    upper: np.ndarray  # d x c


def _bayes_method(data: Dataset, design: StudyDesign, seed: int) -> MethodIntervals:
    config = SamplerConfig(iterations=design.iterations, burn_in=design.burn_in,
                           thin=design.thin, seed=seed)
    base = Hyperparams(lambda1_sq=design.lambda1_sq, lambda2_sq=design.lambda2_sq,
                       a_sigma=design.a_sigma, b_sigma=design.b_sigma)
    if design.bayes_tuning == "fixed":
        chain = run_gibbs(data, base, config)
    else:
        _, chain = grid_search(data, TuningGrid(design.bayes_grid), base, config)
    report = credible_intervals(chain, design.level)
    return MethodIntervals(lower=report.lower, upper=report.upper)


def _bootstrap_method(data: Dataset, design: StudyDesign, seed: int) -> MethodIntervals:
    g1, g2 = cv_select(data.X, data.Y, data.groups, design.cv_grid,
                       folds=design.cv_folds, seed=derive_seed(seed, 0))
    res = bootstrap_intervals(
        data.X, data.Y, data.groups, g1, g2,
        B=design.bootstrap_replicates, level=design.level,
        seed=derive_seed(seed, 1), min_replicates=4,
    )
    return MethodIntervals(lower=res.lower, upper=res.upper)


DEFAULT_METHODS: dict[str, Callable[[Dataset, StudyDesign, int], MethodIntervals]] = {
    "bayes": _bayes_method,
    "bootstrap": _bootstrap_method,
}


@dataclass
class CoverageTable:
    """Mean coverage probabilities per method, overall and on active rows."""

    study: str
    methods: tuple[str, ...]
    mcp_overall: dict[str, float]
    mcp_active: dict[str, float]
    replicates_ok: dict[str, int]
    replicates_failed: dict[str, int]

    def rows(self) -> list[dict]:
        return [
            {
                "study": self.study,
                "method": m,
                "mcp_overall": self.mcp_overall[m],
                "mcp_active": self.mcp_active[m],
                "replicates_ok": self.replicates_ok[m],
                "replicates_failed": self.replicates_failed[m],
            }
            for m in self.methods
        ]


def _one_replicate(design: StudyDesign, methods, r: int, X_fixed=None):
    groups = design.groups
    rng = np.random.default_rng(derive_seed(design.seed, r))
    if X_fixed is not None:
        X = X_fixed
    else:
        X = generate_genotypes(design.n, groups, rng,
                               maf_range=design.maf_range,
                               ld_correlation=design.ld_correlation)
    W_true, _ = simulate_truth(
        groups, design.c, design.lambda1_sq, design.lambda2_sq, design.sigma2,
        design.active_genes, design.extra_active_snps, rng,
    )
    Y = simulate_phenotypes(X, W_true, design.sigma2, design.error_family, rng)
    data = Dataset(X=X, Y=Y, groups=groups)
    active = np.any(W_true != 0.0, axis=1)
    out = {}
    for name, fn in methods.items():
        try:
            iv = fn(data, design, derive_seed(design.seed, r, zlib.crc32(name.encode())))
            covered = (iv.lower <= W_true) & (W_true <= iv.upper)
            out[name] = (covered, active)
        except Exception as exc:  # noqa: BLE001 - a failed replicate is data
            out[name] = exc
    return r, out


def run_study(
    design: StudyDesign,
    methods: Optional[dict[str, Callable]] = None,
    n_jobs: int = 1,
) -> CoverageTable:
    """Estimate interval coverage for each method over seeded replicates.

    Every replicate regenerates genotypes, truth and phenotypes from its
    own child stream, so the table is reproducible from ``design.seed``
    alone. A method failing on a replicate drops that replicate from the
    method's aggregate (with a warning) without affecting other methods.
    """
    if methods is None:
        methods = DEFAULT_METHODS
    X_fixed = None
    if design.genotypes_csv is not None:
        from .io import load_genotypes

        X_fixed, _ = load_genotypes(design.genotypes_csv)
        if X_fixed.shape != (design.n, design.d):
            raise ValueError(
                f"fixed genotype panel has shape {X_fixed.shape}, design wants "
                f"({design.n}, {design.d})"
            )
    results = Parallel(n_jobs=n_jobs)(
        delayed(_one_replicate)(design, methods, r, X_fixed)
        for r in range(design.replicates)
    )
    results.sort(key=lambda t: t[0])

    mcp_overall, mcp_active, ok_count, fail_count = {}, {}, {}, {}
    for name in methods:
        overall_hits, overall_n = 0, 0
        active_hits, active_n = 0, 0
        ok = failed = 0
        for r, out in results:
            payload = out[name]
            if isinstance(payload, Exception):
                warnings.warn(
                    f"study {design.name}: method {name} failed on replicate {r}: {payload}",
                    stacklevel=2,
                )
                failed += 1
                continue
            covered, active = payload
            ok += 1
            overall_hits += int(covered.sum())
            overall_n += covered.size
            active_hits += int(covered[active].sum())
            active_n += int(active.sum()) * covered.shape[1]
        if overall_n == 0:
            raise RuntimeError(f"method {name} failed on every replicate")
        mcp_overall[name] = overall_hits / overall_n
        mcp_active[name] = active_hits / active_n if active_n else float("nan")
        ok_count[name] = ok
        fail_count[name] = failed
    return CoverageTable(
        study=design.name,
        methods=tuple(methods.keys()),
        mcp_overall=mcp_overall,
        mcp_active=mcp_active,
        replicates_ok=ok_count,
        replicates_failed=fail_count,
    )
