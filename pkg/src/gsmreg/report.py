"""Posterior summarization, SNP selection and ranking, and interval plots.

Selection follows the interval protocol: a (SNP, phenotype) pair is flagged
when its equal-tail credible interval strictly excludes zero (an endpoint
touching zero does not select). Ranking scores each SNP by the sum of
absolute posterior-mean coefficients across phenotypes; a top-ranked SNP can
still have every interval covering zero, which is exactly the distinction
between a large point estimate and evidence against the null.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ChainOutput

__all__ = [
    "IntervalReport",
    "credible_intervals",
    "select_snps",
    "rank_snps",
    "standardize_phenotypes",
    "emit_interval_plot",
    "split_rhat",
]

MIN_DRAWS_FOR_INTERVALS = 100


@dataclass
class IntervalReport:
    """Per-(SNP, phenotype) posterior mean and equal-tail interval."""

    mean: np.ndarray       # d x c
    lower: np.ndarray      # d x c
    upper: np.ndarray      # d x c
    level: float
    snp_names: tuple[str, ...]
    phenotype_names: tuple[str, ...]

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValueError("interval lower bounds must not exceed upper bounds")

    @property
    def selected_pairs_mask(self) -> np.ndarray:
        """Boolean d x c mask: interval strictly excludes zero."""
        return (self.lower > 0.0) | (self.upper < 0.0)

    @property
    def selected_snp_mask(self) -> np.ndarray:
        """Boolean d mask: at least one phenotype interval excludes zero."""
        return self.selected_pairs_mask.any(axis=1)

    def rank_scores(self) -> np.ndarray:
        return np.abs(self.mean).sum(axis=1)


def credible_intervals(chain: ChainOutput, level: float = 0.95) -> IntervalReport:
    """Equal-tail posterior intervals from stored draws.

    Endpoints are the empirical quantiles at (1 - level)/2 and
    1 - (1 - level)/2, linearly interpolated between order statistics;
    the point summary is the draw mean.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    S = chain.n_draws
    if S < MIN_DRAWS_FOR_INTERVALS:
        raise ValueError(f"need at least {MIN_DRAWS_FOR_INTERVALS} stored draws, got {S}")
    d, c = chain.W.shape[1:]
    alpha = 0.5 * (1.0 - level)
    lower, upper = np.quantile(chain.W, [alpha, 1.0 - alpha], axis=0, method="linear")
    mean = chain.W.mean(axis=0)
    snp_names = chain.snp_names or tuple(f"snp{i}" for i in range(d))
    phen_names = chain.phenotype_names or tuple(f"phen{j}" for j in range(c))
    return IntervalReport(mean=mean, lower=lower, upper=upper, level=level,
                          snp_names=tuple(snp_names), phenotype_names=tuple(phen_names))


def select_snps(report: IntervalReport) -> tuple[list[tuple[str, str]], list[str]]:
    """Pairs whose interval excludes zero, plus the deduplicated SNP list."""
    mask = report.selected_pairs_mask
    pairs = [
        (report.snp_names[i], report.phenotype_names[j])
        for i, j in zip(*np.nonzero(mask))
    ]
    snps = [report.snp_names[i] for i in np.nonzero(report.selected_snp_mask)[0]]
    return pairs, snps


def rank_snps(W_hat: np.ndarray, snp_names: Optional[Sequence[str]] = None) -> list[tuple[str, float]]:
    """SNPs ordered by sum_j |w_ij| descending; ties keep input order."""
    W_hat = np.asarray(W_hat, dtype=np.float64)
    if W_hat.ndim != 2:
        raise ValueError("W_hat must be a d x c matrix")
    d = W_hat.shape[0]
    if snp_names is None:
        snp_names = [f"snp{i}" for i in range(d)]
    if len(snp_names) != d:
        raise ValueError("one name per SNP row required")
    scores = np.abs(W_hat).sum(axis=1)
    order = np.argsort(-scores, kind="stable")
    return [(str(snp_names[i]), float(scores[i])) for i in order]


def standardize_phenotypes(Y_raw: np.ndarray, names: Optional[Sequence[str]] = None):
    """Center and scale each column to sample mean 0 and variance 1 (ddof=1).

    Returns (Y, means, sds); raw values are recovered as Y * sds + means.
    A zero-variance column is an error naming the offending column.
    """
    Y_raw = np.asarray(Y_raw, dtype=np.float64)
    if Y_raw.ndim != 2:
        raise ValueError("Y_raw must be 2-dimensional")
    if Y_raw.shape[0] < 2:
        raise ValueError("standardization needs at least 2 subjects")
    means = Y_raw.mean(axis=0)
    sds = Y_raw.std(axis=0, ddof=1)
    bad = np.nonzero(sds == 0.0)[0]
    if bad.size:
        label = names[bad[0]] if names is not None else f"column {bad[0]}"
        raise ValueError(f"phenotype {label} has zero sample variance")
    return (Y_raw - means) / sds, means, sds


def split_rhat(chain: ChainOutput) -> np.ndarray:
    """Split-chain potential-scale-reduction factor per coefficient (d x c).

    Halves of one chain play the role of independent chains; values near 1
    indicate the retained draws mix well. Informational only: no burn-in
    length is derived from it.
    """
    S = chain.n_draws
    if S < 4:
        raise ValueError("split diagnostic needs at least 4 stored draws")
    half = S // 2
    halves = np.stack([chain.W[:half], chain.W[S - half:]])  # (2, half, d, c)
    means = halves.mean(axis=1)
    vars_ = halves.var(axis=1, ddof=1)
    W_within = vars_.mean(axis=0)
    B_between = half * means.var(axis=0, ddof=1)
    var_plus = (half - 1) / half * W_within + B_between / half
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / W_within)
    return np.where(W_within > 0, rhat, 1.0)


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def emit_interval_plot(report: IntervalReport, snp: str, path) -> None:
    """Write a per-SNP interval plot as a standalone SVG file.

    One glyph per phenotype, in the report's phenotype order: a vertical
    segment for the equal-tail interval with a point marker at the
    posterior mean, over a dashed zero line. Glyphs whose interval excludes
    zero carry the "selected" class. Bytes are a pure function of the
    report contents.
    """
    try:
        i = report.snp_names.index(snp)
    except ValueError:
        raise KeyError(f"SNP {snp!r} not present in the report") from None
    c = len(report.phenotype_names)
    lower, upper, mean = report.lower[i], report.upper[i], report.mean[i]
    selected = report.selected_pairs_mask[i]

    width, height = max(320, 60 + 34 * c), 300
    left, right, top, bottom = 52.0, 16.0, 18.0, 46.0
    span = float(max(np.max(upper), 0.0) - min(np.min(lower), 0.0))
    pad = 0.05 * (span if span > 0 else 1.0)
    y_hi = float(max(np.max(upper), 0.0) + pad)
    y_lo = float(min(np.min(lower), 0.0) - pad)

    def ypix(v: float) -> float:
        return top + (y_hi - v) / (y_hi - y_lo) * (height - top - bottom)

    def xpix(j: int) -> float:
        return left + (j + 0.5) / c * (width - left - right)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<style>"
        ".interval line{stroke:#46618f;stroke-width:2}"
        ".interval circle{fill:#46618f}"
        ".interval.selected line{stroke:#b03a2e;stroke-width:2.5}"
        ".interval.selected circle{fill:#b03a2e}"
        ".zero{stroke:#888;stroke-dasharray:4 3;stroke-width:1}"
        ".axis{stroke:#222;stroke-width:1}"
        "text{font-family:sans-serif;font-size:10px;fill:#222}"
        "</style>",
        f'<text x="{_fmt(width / 2)}" y="12" text-anchor="middle">{snp}: '
        f'{100 * report.level:g}% equal-tail credible intervals</text>',
        f'<line class="axis" x1="{_fmt(left)}" y1="{_fmt(ypix(y_hi))}" '
        f'x2="{_fmt(left)}" y2="{_fmt(ypix(y_lo))}"/>',
        f'<line class="zero" x1="{_fmt(left)}" y1="{_fmt(ypix(0.0))}" '
        f'x2="{_fmt(width - right)}" y2="{_fmt(ypix(0.0))}"/>',
    ]
    for v in (y_lo, 0.0, y_hi):
        parts.append(
            f'<text x="{_fmt(left - 4)}" y="{_fmt(ypix(v) + 3)}" text-anchor="end">{_fmt(v)}</text>'
        )
    for j, name in enumerate(report.phenotype_names):
        cls = "interval selected" if selected[j] else "interval"
        x = xpix(j)
        parts.append(f'<g class="{cls}">')
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(ypix(float(lower[j])))}" '
            f'x2="{_fmt(x)}" y2="{_fmt(ypix(float(upper[j])))}"/>'
        )
        parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(ypix(float(mean[j])))}" r="2.5"/>')
        parts.append("</g>")
        parts.append(
            f'<text x="{_fmt(x)}" y="{height - 30}" text-anchor="end" '
            f'transform="rotate(-45 {_fmt(x)} {height - 30})">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
