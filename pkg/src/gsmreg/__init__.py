"""Bayesian group-sparse multi-task regression for SNP/phenotype panels.

Fits a hierarchical regression whose coefficient prior shrinks whole gene
blocks and single SNP rows jointly, via a blocked Gibbs sampler with exact
conditionals; selects shrinkage strengths by an information-criterion grid
search; and ships a penalized point estimator with bootstrap intervals as
the frequentist baseline, plus coverage-study and reporting tooling.
"""

__version__ = "0.1.0"

from .gibbs import (
    GramCache,
    SamplerConfig,
    run_gibbs,
    sample_inverse_gaussian,
    update_coefficient_block,
    update_omega2,
    update_sigma2,
    update_tau2,
)
from .model import (
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
from .penalized import (
    BootstrapResult,
    PenalizedFit,
    bootstrap_intervals,
    cv_select,
    fit_penalized,
)
from .report import (
    IntervalReport,
    credible_intervals,
    emit_interval_plot,
    rank_snps,
    select_snps,
    standardize_phenotypes,
)
from .simulate import (
    CoverageTable,
    StudyDesign,
    generate_genotypes,
    run_study,
    simulate_phenotypes,
    simulate_truth,
)
from .tuning import TuningGrid, WaicReport, derive_seed, grid_search, waic

__all__ = [
    "__version__",
    "ChainOutput",
    "CoefficientMatrix",
    "Dataset",
    "GroupStructure",
    "Hyperparams",
    "MixingState",
    "group_norms",
    "kernel_integral_bound",
    "log_likelihood",
    "log_prior_kernel",
    "penalized_objective",
    "pointwise_log_likelihood",
    "GramCache",
    "SamplerConfig",
    "run_gibbs",
    "sample_inverse_gaussian",
    "update_coefficient_block",
    "update_omega2",
    "update_sigma2",
    "update_tau2",
    "TuningGrid",
    "WaicReport",
    "derive_seed",
    "grid_search",
    "waic",
    "BootstrapResult",
    "PenalizedFit",
    "bootstrap_intervals",
    "cv_select",
    "fit_penalized",
    "IntervalReport",
    "credible_intervals",
    "emit_interval_plot",
    "rank_snps",
    "select_snps",
    "standardize_phenotypes",
    "CoverageTable",
    "StudyDesign",
    "generate_genotypes",
    "run_study",
    "simulate_phenotypes",
    "simulate_truth",
]
