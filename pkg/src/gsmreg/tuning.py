"""Information-criterion tuning of the shrinkage strengths.

The criterion approximates leave-one-subject-out predictive fit from the
stored per-draw log densities:

    IC = -2 sum_l log mean_s p(y_l | draw_s) + 2 sum_l var_s log p(y_l | draw_s)

One independent chain runs per grid point; the pair minimizing the
criterion is kept. Chains at different grid points share nothing and run
on a work pool; results reduce deterministically by grid index regardless
of scheduling.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from ._rng import derive_seed
from .gibbs import SamplerConfig, run_gibbs
from .model import ChainOutput, Dataset, Hyperparams

__all__ = [
    "TuningGrid",
    "WaicReport",
    "waic",
    "grid_search",
    "derive_seed",
]


@dataclass(frozen=True)
class TuningGrid:
    """Ordered list of (lambda1_sq, lambda2_sq) pairs, positive, no duplicates."""

    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(a), float(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError("tuning grid must not be empty")
        for a, b in pairs:
            if a <= 0 or b <= 0:
                raise ValueError(f"grid pairs must be strictly positive, got ({a}, {b})")
        if len(set(pairs)) != len(pairs):
            raise ValueError("tuning grid contains duplicate pairs")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.pairs)

    @classmethod
    def log10(cls, lo_exp: int = -5, hi_exp: int = 5) -> "TuningGrid":
        """Full cartesian grid {10^lo, ..., 10^hi}^2; the default 11 x 11."""
        vals = [10.0**e for e in range(lo_exp, hi_exp + 1)]
        return cls(tuple((a, b) for a in vals for b in vals))

    @classmethod
    def log10_compact(cls) -> "TuningGrid":
        """7 x 7 subgrid {10^-3, ..., 10^3}^2 (49 points), sized for running
        every chain of the grid concurrently on a modest cluster."""
        return cls.log10(-3, 3)

    @classmethod
    def from_values(cls, values1: Sequence[float], values2: Optional[Sequence[float]] = None) -> "TuningGrid":
        if values2 is None:
            values2 = values1
        return cls(tuple((float(a), float(b)) for a in values1 for b in values2))


def waic(chain: ChainOutput) -> tuple[float, float, float]:
    """Return (criterion, lppd, penalty) from a chain's stored log densities.

    The predictive-density term uses log-sum-exp across draws; the penalty
    is the sample variance (ddof=1) of each subject's log density across
    draws. Requires at least two stored draws.
    """
    L = chain.log_lik
    S = L.shape[0]
    if S < 2:
        raise ValueError(f"criterion needs >= 2 stored draws, got {S}")
    lppd_l = logsumexp(L, axis=0) - np.log(S)
    penalty_l = np.var(L, axis=0, ddof=1)
    lppd = float(lppd_l.sum())
    penalty = float(penalty_l.sum())
    return -2.0 * lppd + 2.0 * penalty, lppd, penalty


@dataclass
class GridPointResult:
    lambda1_sq: float
    lambda2_sq: float
    seed: int
    ok: bool
    waic: float = np.nan
    lppd: float = np.nan
    penalty: float = np.nan
    seconds: float = np.nan
    error: Optional[str] = None


@dataclass
class WaicReport:
    """Per-grid-point criterion values and the argmin index.

    The stored criterion equals -2*lppd + 2*penalty exactly as assembled
    from the two stored terms. Failed points are excluded from the argmin;
    ties break to the smallest grid index.
    """

    points: list[GridPointResult]
    best_index: int

    @property
    def best(self) -> GridPointResult:
        return self.points[self.best_index]

    @property
    def n_failed(self) -> int:
        return sum(1 for p in self.points if not p.ok)

    def rows(self) -> list[dict]:
        return [
            {
                "lambda1_sq": p.lambda1_sq,
                "lambda2_sq": p.lambda2_sq,
                "waic": p.waic,
                "lppd": p.lppd,
                "penalty": p.penalty,
                "seed": p.seed,
                "seconds": p.seconds,
            }
            for p in self.points
        ]


def _point_hyper_config(hyper_base: Hyperparams, config: SamplerConfig,
                        pair: tuple[float, float], seed: int):
    hyper = Hyperparams(
        lambda1_sq=pair[0], lambda2_sq=pair[1],
        a_sigma=hyper_base.a_sigma, b_sigma=hyper_base.b_sigma,
    )
    cfg = SamplerConfig(
        iterations=config.iterations, burn_in=config.burn_in, thin=config.thin,
        seed=seed, init=config.init, numeric_floor=config.numeric_floor,
    )
    return hyper, cfg


def _run_point(data: Dataset, hyper_base: Hyperparams, config: SamplerConfig,
               pair: tuple[float, float], seed: int):
    hyper, cfg = _point_hyper_config(hyper_base, config, pair, seed)
    t0 = time.perf_counter()
    chain = run_gibbs(data, hyper, cfg)
    ic, lppd, penalty = waic(chain)
    # the chain itself is dropped; the argmin point is rerun at the same
    # seed afterwards, so memory stays at one retained chain total
    return ic, lppd, penalty, time.perf_counter() - t0


def grid_search(
    data: Dataset,
    grid: TuningGrid,
    hyper_base: Hyperparams,
    config: SamplerConfig,
    n_jobs: int = 1,
) -> tuple[WaicReport, ChainOutput]:
    """Run one chain per grid point and keep the criterion-minimizing chain.

    Each point gets a child seed derived from (config.seed, point index),
    so the result does not depend on scheduling or evaluation order; the
    winning chain is reproduced from its seed rather than held in memory
    alongside every other chain. A failing chain marks its point failed;
    if every point fails the search raises.
    """

    def _safe(i, pair):
        try:
            return i, _run_point(data, hyper_base, config, pair, derive_seed(config.seed, i)), None
        except Exception as exc:  # noqa: BLE001 - failure is per-point data
            return i, None, f"{type(exc).__name__}: {exc}"

    results = Parallel(n_jobs=n_jobs)(
        delayed(_safe)(i, pair) for i, pair in enumerate(grid)
    )
    results.sort(key=lambda r: r[0])

    points: list[GridPointResult] = []
    for i, payload, err in results:
        pair = grid.pairs[i]
        seed = derive_seed(config.seed, i)
        if err is None:
            ic, lppd, penalty, secs = payload
            points.append(GridPointResult(pair[0], pair[1], seed, True, ic, lppd, penalty, secs))
        else:
            points.append(GridPointResult(pair[0], pair[1], seed, False, error=err))

    ok_idx = [i for i, p in enumerate(points) if p.ok]
    if not ok_idx:
        raise RuntimeError("every grid point failed: " + "; ".join(p.error or "?" for p in points))
    best = min(ok_idx, key=lambda i: (points[i].waic, i))
    hyper, cfg = _point_hyper_config(hyper_base, config, grid.pairs[best],
                                     derive_seed(config.seed, best))
    return WaicReport(points=points, best_index=best), run_gibbs(data, hyper, cfg)
