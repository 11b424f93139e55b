"""
Command-line entry point for gvc-spatial.

    gvcspatial weights  --flows tiva.csv --panel panel.csv --out out/
    gvcspatial autocorr --panel panel.csv --flows tiva.csv --permutations 999
    gvcspatial fit      --panel panel.csv --flows tiva.csv --covariates block1 block4
    gvcspatial effects  --panel panel.csv --weights out/weight_matrix.csv --draws 1000 --seed 7
    gvcspatial simulate --reps 200 --seed 1
    gvcspatial unitroot --panel panel.csv --lags auto
    gvcspatial report   --config run.env

Exit status is 0 on success, 2 on usage errors and 1 on any other
pipeline error.
"""

import argparse
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from rich.console import Console

from ..core.config import get_settings
from ..core.errors import GvcSpatialError, UsageError
from ..core.logging import command_context, get_logger, log_error, setup_logging
from .commands import (
    run_all,
    run_autocorr,
    run_effects,
    run_fit,
    run_simulate,
    run_unitroot,
    run_weights,
)
from .config import load_campaign, load_run_config, parse_columns
from .reports import Report, write_report

logger = get_logger("cli")

FORMATS = ("json", "csv", "text")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", dest="formats", nargs="+", choices=FORMATS, help="output formats")
    parser.add_argument("--seed", type=int, help="top-level random seed")


def _panel(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--panel", help="panel CSV (raw sources or derived indicators)")
    parser.add_argument("--column", dest="columns", action="append", metavar="KEY=NAME",
                        help="map a logical field to a CSV column; repeatable")
    parser.add_argument("--years", help="panel year range, e.g. 1997-2014")
    balance = parser.add_mutually_exclusive_group()
    balance.add_argument("--strict", dest="strict", action="store_true", default=None,
                         help="reject unbalanced panels (default)")
    balance.add_argument("--drop-unbalanced", dest="strict", action="store_false",
                         help="drop countries with missing years")


def _weights(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--flows", help="bilateral value-added export flows CSV")
    source.add_argument("--weights", help="labelled weight matrix CSV")
    parser.add_argument("--period", dest="flow_period", help="years aggregated into the weights, e.g. 1997-2014")


def _models(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--covariates", nargs="+", metavar="BLOCK",
                        help="block1..block4 or custom:NAME,NAME (default: all four blocks)")
    parser.add_argument("--models", nargs="+", help="models among FE RE SAR SEM SDM")
    parser.add_argument("--spatial-lag", dest="spatial_lag", nargs="+", metavar="VAR",
                        help="covariates lagged by W in SDM (default: GVC)")
    parser.add_argument("--lee-yu", dest="lee_yu", action="store_true", default=None,
                        help="bias-correct sigma2 in the spatial models")
    parser.add_argument("--numerical-hessian", dest="numerical_hessian", action="store_true", default=None,
                        help="numerical instead of analytic information matrix")


def _lags(value: str) -> Any:
    return value if value == "auto" else int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvcspatial", description="Spatial panel analysis of GVC participation "
                                     "and carbon-intensity convergence")
    sub = parser.add_subparsers(dest="command", required=True)

    weights = sub.add_parser("weights", help="build the trade-based weight matrix")
    _common(weights)
    _panel(weights)
    _weights(weights)
    weights.add_argument("--reference", action="store_true", default=None,
                         help="label the matrix with the shipped 101-country list")
    weights.set_defaults(handler=cmd_weights)

    autocorr = sub.add_parser("autocorr", help="Moran's I and Geary's C of CI growth")
    _common(autocorr)
    _panel(autocorr)
    _weights(autocorr)
    autocorr.add_argument("--permutations", type=int, help="permutation replications (>= 99)")
    autocorr.add_argument("--growth", choices=("total", "mean"), help="growth definition")
    autocorr.set_defaults(handler=cmd_autocorr)

    fit = sub.add_parser("fit", help="estimate the panel models per covariate block")
    _common(fit)
    _panel(fit)
    _weights(fit)
    _models(fit)
    fit.set_defaults(handler=cmd_fit)

    effects = sub.add_parser("effects", help="direct, indirect and total effects with convergence rates")
    _common(effects)
    _panel(effects)
    _weights(effects)
    _models(effects)
    effects.add_argument("--draws", type=int, help="parameter draws for simulated inference (>= 100)")
    effects.set_defaults(handler=cmd_effects)

    simulate = sub.add_parser("simulate", help="Monte Carlo campaign")
    simulate.add_argument("--campaign", help="campaign key=value file (default: bundled)")
    simulate.add_argument("--out", help="output directory")
    simulate.add_argument("--format", dest="formats", nargs="+", choices=FORMATS, help="output formats")
    simulate.add_argument("--seed", type=int, help="campaign seed")
    simulate.add_argument("--reps", type=int, help="replications (>= 50)")
    simulate.add_argument("--workers", type=int, help="worker processes")
    simulate.add_argument("--estimators", nargs="+", help="estimators among FE RE SAR SEM SDM")
    simulate.set_defaults(handler=cmd_simulate)

    unitroot = sub.add_parser("unitroot", help="Levin-Lin-Chu tests on the model variables")
    _common(unitroot)
    _panel(unitroot)
    unitroot.add_argument("--lags", type=_lags, help="ADF lag order or 'auto'")
    unitroot.add_argument("--trend", choices=("n", "c", "ct"), help="deterministic terms")
    unitroot.add_argument("--levels", dest="unitroot_log", action="store_false", default=None,
                          help="test levels instead of logs")
    unitroot.set_defaults(handler=cmd_unitroot)

    report = sub.add_parser("report", help="run every stage from one configuration file")
    _common(report)
    report.set_defaults(handler=cmd_report)
    return parser


def _overrides(args: argparse.Namespace, keys: Sequence[str]) -> Dict[str, Any]:
    values = {key: getattr(args, key, None) for key in keys}
    if values.get("columns") is not None:
        values["columns"] = parse_columns(values["columns"])
    return values


RUN_KEYS = (
    "panel", "flows", "weights", "flow_period", "years", "columns", "strict", "reference",
    "covariates", "models", "spatial_lag", "draws", "permutations", "growth", "lags", "trend",
    "unitroot_log", "lee_yu", "numerical_hessian", "seed", "out", "formats",
)


def _emit(reports: List[Report], out: Any, formats: Sequence[str], console: Console) -> None:
    for report in reports:
        paths = write_report(report, out, formats, console)
        logger.info("Report written", report=report.name, files=[str(p) for p in paths])


def _run(args: argparse.Namespace, stage: Callable[..., Any]) -> int:
    cfg = load_run_config(args.config, _overrides(args, RUN_KEYS))
    result = stage(cfg)
    report = result[0] if isinstance(result, tuple) else result
    _emit([report], cfg.out, cfg.formats, args.console)
    return 0


def cmd_weights(args: argparse.Namespace) -> int:
    """Weight matrix and graph files plus a summary report."""
    return _run(args, run_weights)


def cmd_autocorr(args: argparse.Namespace) -> int:
    """Table of global autocorrelation statistics."""
    return _run(args, run_autocorr)


def cmd_fit(args: argparse.Namespace) -> int:
    """Coefficient table per covariate block with the specification tests."""
    return _run(args, run_fit)


def cmd_effects(args: argparse.Namespace) -> int:
    """Effects table per covariate block with the convergence-rate row."""
    return _run(args, run_effects)


def cmd_unitroot(args: argparse.Namespace) -> int:
    return _run(args, run_unitroot)


def cmd_simulate(args: argparse.Namespace) -> int:
    campaign = load_campaign(args.campaign, _overrides(args, ("seed", "reps", "workers", "estimators", "out", "formats")))
    _emit([run_simulate(campaign)], campaign.out, campaign.formats, args.console)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.config is None:
        raise UsageError("report needs --config")
    cfg = load_run_config(args.config, _overrides(args, ("out", "formats", "seed")))
    _emit(run_all(cfg), cfg.out, cfg.formats, args.console)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()
    args.console = Console(highlight=False, soft_wrap=True)
    errors = Console(stderr=True, highlight=False, soft_wrap=True)
    settings = get_settings()
    with command_context(args.command, seed=getattr(args, "seed", None)):
        logger.info("Command started", version=settings.app_version)
        try:
            return int(args.handler(args))
        except UsageError as exc:
            log_error(exc, 2)
            errors.print(f"usage error: {exc}", markup=False)
            return 2
        except GvcSpatialError as exc:
            log_error(exc, 1)
            errors.print(f"error: {exc}", markup=False)
            return 1


if __name__ == "__main__":
    sys.exit(main())
