"""Flat-file ingestion and emission.

Input formats (all CSV with headers):
  genotypes  rows = subjects, columns = SNPs, header = SNP IDs, cells in {0,1,2}
  phenotypes rows = subjects, header = phenotype IDs
  groups     two columns snp_id,gene_id mapping every SNP to its gene

Floats are written with ``repr``, the shortest digit string that parses back
to the identical IEEE double, so emit -> ingest round-trips bit-exactly and
equal inputs produce byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import ChainOutput, Dataset, GroupStructure

__all__ = [
    "InputError",
    "load_genotypes",
    "load_phenotypes",
    "load_groups",
    "load_dataset",
    "write_genotypes",
    "write_phenotypes",
    "write_groups",
    "write_dataset",
    "write_posterior_summary",
    "write_selection",
    "write_ranking",
    "write_waic_grid",
    "write_bootstrap_intervals",
    "write_coverage",
    "save_chain",
    "load_chain",
    "write_manifest",
]


class InputError(ValueError):
    """Malformed or inconsistent input files."""


def _fmt(x) -> str:
    return repr(float(x))


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def load_genotypes(path) -> tuple[np.ndarray, list[str]]:
    """Read a genotype CSV; returns (X, snp_ids)."""
    header, rows = _read_table(path)
    if not rows:
        raise InputError(f"{path}: no subject rows")
    try:
        X = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric genotype entry ({exc})") from None
    if X.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    if not np.isin(X, (0.0, 1.0, 2.0)).all():
        raise InputError(f"{path}: genotype entries must be 0, 1 or 2 (no missing values)")
    return X, header


def load_phenotypes(path) -> tuple[np.ndarray, list[str]]:
    header, rows = _read_table(path)
    if not rows:
        raise InputError(f"{path}: no subject rows")
    try:
        Y = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric phenotype entry ({exc})") from None
    if Y.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    return Y, header


def load_groups(path) -> dict[str, str]:
    """Read the snp_id -> gene_id map."""
    header, rows = _read_table(path)
    if [h.lower() for h in header[:2]] != ["snp_id", "gene_id"]:
        raise InputError(f"{path}: expected header snp_id,gene_id")
    mapping: dict[str, str] = {}
    for row in rows:
        if len(row) < 2:
            raise InputError(f"{path}: malformed row {row!r}")
        snp, gene = row[0].strip(), row[1].strip()
        if snp in mapping:
            raise InputError(f"{path}: SNP {snp!r} mapped twice")
        mapping[snp] = gene
    return mapping


def load_dataset(genotypes_path, phenotypes_path, groups_path,
                 standardized: bool = False) -> Dataset:
    """Assemble a Dataset from the three input files.

    Groups are ordered by first appearance along the genotype columns, and
    every SNP column must be mapped to a gene. Empty genes cannot arise:
    a gene label exists only through the SNPs that carry it.
    """
    X, snp_ids = load_genotypes(genotypes_path)
    Y, phen_ids = load_phenotypes(phenotypes_path)
    if Y.shape[0] != X.shape[0]:
        raise InputError(
            f"genotypes have {X.shape[0]} subjects but phenotypes have {Y.shape[0]}"
        )
    mapping = load_groups(groups_path)
    missing = [s for s in snp_ids if s not in mapping]
    if missing:
        raise InputError(f"groups file lacks entries for SNPs: {missing[:5]}"
                         + ("..." if len(missing) > 5 else ""))
    genes = [mapping[s] for s in snp_ids]
    groups = GroupStructure.from_labels(genes)
    return Dataset(X=X, Y=Y, groups=groups, snp_names=tuple(snp_ids),
                   phenotype_names=tuple(phen_ids), standardized=standardized)


def _write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_genotypes(path, X: np.ndarray, snp_ids: Sequence[str]) -> None:
    _write_csv(path, snp_ids, ([f"{int(v)}" for v in row] for row in np.asarray(X)))


def write_phenotypes(path, Y: np.ndarray, phen_ids: Sequence[str]) -> None:
    _write_csv(path, phen_ids, ([_fmt(v) for v in row] for row in np.asarray(Y)))


def write_groups(path, snp_ids: Sequence[str], gene_ids: Sequence[str]) -> None:
    _write_csv(path, ["snp_id", "gene_id"], ([s, g] for s, g in zip(snp_ids, gene_ids)))


def write_dataset(out_dir, data: Dataset) -> dict[str, Path]:
    """Emit genotypes.csv / phenotypes.csv / groups.csv for a dataset."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = data.n_snps
    snp_ids = list(data.snp_names) if data.snp_names else [f"snp{i}" for i in range(d)]
    phen_ids = (list(data.phenotype_names) if data.phenotype_names
                else [f"phen{j}" for j in range(data.n_phenotypes)])
    gene_ids = [data.groups.labels[k] for k in data.groups.group_of]
    paths = {
        "genotypes": out / "genotypes.csv",
        "phenotypes": out / "phenotypes.csv",
        "groups": out / "groups.csv",
    }
    write_genotypes(paths["genotypes"], data.X, snp_ids)
    write_phenotypes(paths["phenotypes"], data.Y, phen_ids)
    write_groups(paths["groups"], snp_ids, gene_ids)
    return paths


def write_posterior_summary(path, report) -> None:
    """snp,phenotype,mean,lower,upper,selected with selected as 0/1."""
    mask = report.selected_pairs_mask

    def rows():
        for i, snp in enumerate(report.snp_names):
            for j, phen in enumerate(report.phenotype_names):
                yield [
                    snp, phen,
                    _fmt(report.mean[i, j]), _fmt(report.lower[i, j]),
                    _fmt(report.upper[i, j]), str(int(mask[i, j])),
                ]

    _write_csv(path, ["snp", "phenotype", "mean", "lower", "upper", "selected"], rows())


def write_selection(path, report) -> None:
    """Only the pairs whose interval excludes zero."""
    mask = report.selected_pairs_mask

    def rows():
        for i, j in zip(*np.nonzero(mask)):
            yield [
                report.snp_names[i], report.phenotype_names[j],
                _fmt(report.mean[i, j]), _fmt(report.lower[i, j]), _fmt(report.upper[i, j]),
            ]

    _write_csv(path, ["snp", "phenotype", "mean", "lower", "upper"], rows())


def write_ranking(path, ranked: Sequence[tuple[str, float]]) -> None:
    _write_csv(
        path, ["rank", "snp", "score"],
        ([str(r + 1), snp, _fmt(score)] for r, (snp, score) in enumerate(ranked)),
    )


def write_waic_grid(path, report) -> None:
    _write_csv(
        path,
        ["lambda1_sq", "lambda2_sq", "waic", "lppd", "penalty", "seed", "seconds"],
        (
            [
                _fmt(row["lambda1_sq"]), _fmt(row["lambda2_sq"]),
                _fmt(row["waic"]), _fmt(row["lppd"]), _fmt(row["penalty"]),
                str(row["seed"]), _fmt(row["seconds"]),
            ]
            for row in report.rows()
        ),
    )


def write_bootstrap_intervals(path, result, snp_names: Sequence[str],
                              phenotype_names: Sequence[str]) -> None:
    def rows():
        for i, snp in enumerate(snp_names):
            for j, phen in enumerate(phenotype_names):
                yield [
                    snp, phen,
                    _fmt(result.estimate[i, j]), _fmt(result.lower[i, j]),
                    _fmt(result.upper[i, j]), _fmt(result.converged_fraction),
                ]

    _write_csv(
        path,
        ["snp", "phenotype", "estimate", "lower", "upper", "converged_fraction"],
        rows(),
    )


def write_coverage(path, tables) -> None:
    """Coverage tables, one row per (study, method)."""
    def rows():
        for table in tables:
            for row in table.rows():
                yield [
                    row["study"], row["method"],
                    _fmt(row["mcp_overall"]), _fmt(row["mcp_active"]),
                    str(row["replicates_ok"]), str(row["replicates_failed"]),
                ]

    _write_csv(
        path,
        ["study", "method", "mcp_overall", "mcp_active", "replicates_ok", "replicates_failed"],
        rows(),
    )


def save_chain(path, chain: ChainOutput) -> None:
    meta = {
        "seed": chain.seed,
        "iterations": chain.iterations,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "lambda1_sq": chain.lambda1_sq,
        "lambda2_sq": chain.lambda2_sq,
        "snp_names": list(chain.snp_names) if chain.snp_names else None,
        "phenotype_names": list(chain.phenotype_names) if chain.phenotype_names else None,
    }
    np.savez_compressed(
        path, W=chain.W, sigma2=chain.sigma2, log_lik=chain.log_lik,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
    )


def load_chain(path) -> ChainOutput:
    with np.load(path) as payload:
        meta = json.loads(bytes(payload["meta"]).decode("utf-8"))
        return ChainOutput(
            W=payload["W"], sigma2=payload["sigma2"], log_lik=payload["log_lik"],
            seed=meta["seed"], iterations=meta["iterations"], burn_in=meta["burn_in"],
            thin=meta["thin"], lambda1_sq=meta["lambda1_sq"], lambda2_sq=meta["lambda2_sq"],
            snp_names=tuple(meta["snp_names"]) if meta["snp_names"] else None,
            phenotype_names=tuple(meta["phenotype_names"]) if meta["phenotype_names"] else None,
        )


def write_manifest(path, command: str, seed: Optional[int], config: dict) -> None:
    """Reproducibility record: command, seed, config and its hash, versions."""
    import numba
    import scipy

    from . import __version__

    blob = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "config_sha256": hashlib.sha256(blob.encode("utf-8")).hexdigest(),
        "versions": {
            "gsmreg": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
