"""Batch command-line interface.

Subcommands: fit (single tuning pair), tune (grid + information criterion),
bootstrap (penalized estimator intervals), simulate (coverage studies),
report (summaries and plots from a stored chain). A JSON file passed with
--config supplies defaults for any flag of the subcommand; explicit flags
override it. Every run writes a manifest recording the seed, the effective
configuration and its hash.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure,
4 partial results (some grid chains failed).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .gibbs import SamplerConfig, run_gibbs
from .model import Dataset, Hyperparams
from .penalized import bootstrap_intervals, cv_select
from .report import credible_intervals, emit_interval_plot, rank_snps, split_rhat
from .simulate import StudyDesign, run_study
from .tuning import TuningGrid, grid_search

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def _parse_grid(spec: str) -> TuningGrid:
    """Grid spec: "log:LO:HI" for {10^LO..10^HI}^2, or "a,b,c" for an
    explicit value list applied to both axes, or "a,b;c,d" per axis."""
    spec = spec.strip()
    if spec.startswith("log:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise io.InputError(f"bad grid spec {spec!r}, want log:LO:HI")
        return TuningGrid.log10(int(parts[1]), int(parts[2]))
    if ";" in spec:
        first, second = spec.split(";", 1)
        v1 = [float(v) for v in first.split(",") if v]
        v2 = [float(v) for v in second.split(",") if v]
        return TuningGrid.from_values(v1, v2)
    vals = [float(v) for v in spec.split(",") if v]
    return TuningGrid.from_values(vals)


def _load_data(args) -> Dataset:
    for name in ("genotypes", "phenotypes", "groups"):
        if getattr(args, name) is None:
            raise io.InputError(f"--{name} is required")
    return io.load_dataset(args.genotypes, args.phenotypes, args.groups,
                           standardized=args.assume_standardized)


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(iterations=args.iterations, burn_in=args.burn_in,
                         thin=args.thin, seed=args.seed, init=args.init)


def _hyper(args, lambda1_sq: float, lambda2_sq: float) -> Hyperparams:
    return Hyperparams(lambda1_sq=lambda1_sq, lambda2_sq=lambda2_sq,
                       a_sigma=args.a_sigma, b_sigma=args.b_sigma)


def _write_posterior_outputs(out: Path, chain, args) -> None:
    report = credible_intervals(chain, args.level)
    io.write_posterior_summary(out / "posterior_summary.csv", report)
    io.write_selection(out / "selection.csv", report)
    io.write_ranking(out / "ranking.csv",
                     rank_snps(report.mean, report.snp_names))
    io.save_chain(out / "chain.npz", chain)
    print(f"info: max split-chain Rhat {float(split_rhat(chain).max()):.3f} "
          f"over {chain.n_draws} stored draws", file=sys.stderr)
    for snp in args.plot_snp or []:
        emit_interval_plot(report, snp, out / f"intervals_{snp}.svg")


def _cmd_fit(args) -> int:
    data = _load_data(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chain = run_gibbs(data, _hyper(args, args.lambda1_sq, args.lambda2_sq),
                      _sampler_config(args))
    _write_posterior_outputs(out, chain, args)
    io.write_manifest(out / "manifest.json", "fit", args.seed, _config_dict(args))
    return EXIT_OK


def _cmd_tune(args) -> int:
    data = _load_data(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = _parse_grid(args.grid)
    report, best_chain = grid_search(
        data, grid, _hyper(args, 1.0, 1.0), _sampler_config(args),
        n_jobs=args.chains_parallel,
    )
    io.write_waic_grid(out / "waic_grid.csv", report)
    _write_posterior_outputs(out, best_chain, args)
    io.write_manifest(out / "manifest.json", "tune", args.seed, _config_dict(args))
    if report.n_failed:
        print(f"warning: {report.n_failed} of {len(report.points)} grid chains failed",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_bootstrap(args) -> int:
    data = _load_data(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.gamma1 is not None and args.gamma2 is not None:
        g1, g2 = args.gamma1, args.gamma2
    else:
        grid = _parse_grid(args.cv_grid)
        g1, g2 = cv_select(data.X, data.Y, data.groups, grid.pairs,
                           folds=args.cv_folds, seed=args.seed)
    result = bootstrap_intervals(
        data.X, data.Y, data.groups, g1, g2,
        B=args.replicates, level=args.level, seed=args.seed,
        n_jobs=args.chains_parallel,
    )
    snp = data.snp_names or tuple(f"snp{i}" for i in range(data.n_snps))
    phen = data.phenotype_names or tuple(f"phen{j}" for j in range(data.n_phenotypes))
    io.write_bootstrap_intervals(out / "bootstrap_intervals.csv", result, snp, phen)
    io.write_manifest(out / "manifest.json", "bootstrap", args.seed,
                      {**_config_dict(args), "gamma1": g1, "gamma2": g2})
    return EXIT_OK


def _cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    designs = StudyDesign.list_from_json(args.design)
    tables = [run_study(design, n_jobs=args.chains_parallel) for design in designs]
    io.write_coverage(out / "coverage.csv", tables)
    io.write_manifest(out / "manifest.json", "simulate", None,
                      {"design": str(args.design), "out": str(args.out)})
    return EXIT_OK


def _cmd_report(args) -> int:
    chain = io.load_chain(args.chain)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = credible_intervals(chain, args.level)
    io.write_posterior_summary(out / "posterior_summary.csv", report)
    io.write_selection(out / "selection.csv", report)
    io.write_ranking(out / "ranking.csv", rank_snps(report.mean, report.snp_names))
    for snp in args.plot_snp or []:
        emit_interval_plot(report, snp, out / f"intervals_{snp}.svg")
    io.write_manifest(out / "manifest.json", "report", None, _config_dict(args))
    return EXIT_OK


def _config_dict(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--genotypes", type=Path, help="genotype CSV (subjects x SNPs)")
    p.add_argument("--phenotypes", type=Path, help="phenotype CSV (subjects x phenotypes)")
    p.add_argument("--groups", type=Path, help="snp_id,gene_id map CSV")
    p.add_argument("--assume-standardized", action="store_true",
                   help="assert phenotype columns are already mean-0/variance-1")


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path,
                   help="JSON file of flag defaults (underscore keys); "
                        "explicit flags override it")


def _apply_config_file(parser: argparse.ArgumentParser, argv) -> None:
    """Install a --config file's values as subparser defaults.

    Runs before the real parse so explicitly passed flags still win.
    """
    if "--config" not in argv:
        return
    path = Path(argv[argv.index("--config") + 1])
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise io.InputError(f"{path}: config must be a JSON object")
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    command = next((a for a in argv if not a.startswith("-")), None)
    if not sub_actions or command not in sub_actions[0].choices:
        return
    sub = sub_actions[0].choices[command]
    known = {a.dest for a in sub._actions}
    unknown = set(payload) - known
    if unknown:
        raise io.InputError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in ("genotypes", "phenotypes", "groups", "out", "chain", "design", "config"):
        if key in payload and payload[key] is not None:
            payload[key] = Path(payload[key])
    sub.set_defaults(**payload)
    for action in sub._actions:
        if action.required and action.dest in payload:
            action.required = False


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=5000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--init", default="zeros", choices=["zeros", "penalized"])
    p.add_argument("--a-sigma", dest="a_sigma", type=float, default=1.0)
    p.add_argument("--b-sigma", dest="b_sigma", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsmreg",
        description="Bayesian group-sparse multi-task regression for SNP panels",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="run one chain at a fixed tuning pair")
    _add_config_flag(p)
    _add_data_flags(p)
    _add_sampler_flags(p)
    p.add_argument("--lambda1-sq", dest="lambda1_sq", type=float, required=True)
    p.add_argument("--lambda2-sq", dest="lambda2_sq", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--plot-snp", action="append", metavar="SNP_ID")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("tune", help="grid search with one chain per tuning pair")
    _add_config_flag(p)
    _add_data_flags(p)
    _add_sampler_flags(p)
    p.add_argument("--grid", default="log:-3:3",
                   help='grid spec: "log:LO:HI", "a,b,c", or "a,b;c,d" (default log:-3:3, 49 points)')
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--chains-parallel", type=int, default=1)
    p.add_argument("--plot-snp", action="append", metavar="SNP_ID")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("bootstrap", help="penalized estimator with bootstrap intervals")
    _add_config_flag(p)
    _add_data_flags(p)
    p.add_argument("--gamma1", type=float, help="fix first penalty weight")
    p.add_argument("--gamma2", type=float, help="fix second penalty weight")
    p.add_argument("--cv-grid", default="log:-3:3",
                   help="grid spec for cross-validated selection when gammas not fixed")
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains-parallel", type=int, default=1)
    p.set_defaults(func=_cmd_bootstrap)

    p = sub.add_parser("simulate", help="run coverage study designs from a JSON file")
    _add_config_flag(p)
    p.add_argument("--design", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--chains-parallel", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="summaries, selection, ranking, plots from a chain")
    _add_config_flag(p)
    p.add_argument("--chain", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--plot-snp", action="append", metavar="SNP_ID")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        _apply_config_file(parser, list(argv))
        args = parser.parse_args(argv)
        return args.func(args)
    except (io.InputError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (np.linalg.LinAlgError, RuntimeError, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
