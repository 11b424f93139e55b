"""
Pipeline stages behind the subcommands.

Each stage takes a validated RunConfig, does its work through the library
modules and returns a Report; the spatial stages share the same input
loaders so that weights always follow the panel's country order.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..autocorr.statistics import ci_growth, gearys_c, morans_i, permutation_test
from ..core.errors import DimensionError, ExportError, IngestionError, NestingError, UsageError
from ..core.logging import get_logger, timed
from ..core.results import TestResult
from ..data.frame import RegressionFrame, build_frame, regressor_name
from ..data.panel import INDICATORS, PanelDataset, PanelSchema, load_panel, reference_countries
from ..effects.convergence import convergence_from_effects
from ..effects.impacts import effects_inference
from ..montecarlo.campaign import run_campaign
from ..spatialpanel.base import EstimationOptions, FitResult, ModelKind, ModelSpec
from ..spatialpanel.diagnostics import hausman_test, lr_test, wald_test
from ..spatialpanel.estimate import fit
from ..unitroot.llc import unitroot_table
from ..weights.flows import build_weights, load_flows
from ..weights.graph import export_graph
from ..weights.matrix import WeightMatrix, load_weights, proximity_path, save_weights
from .config import CampaignConfig, RunConfig, derive_seed
from .reports import (
    BlockEffects,
    BlockFits,
    Report,
    autocorr_report,
    campaign_report,
    effects_report,
    fit_report,
    unitroot_report,
    weights_report,
)

logger = get_logger("cli.commands")


def load_run_panel(cfg: RunConfig) -> PanelDataset:
    """The configured panel, with column overrides applied to its header."""
    path = cfg.require_panel()
    schema = None
    if cfg.columns:
        try:
            header = list(pd.read_csv(path, nrows=0).columns)
        except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
            raise IngestionError(f"cannot parse {path}: {exc}") from exc
        schema = PanelSchema.detect(header, cfg.columns)
    panel = load_panel(path, schema=schema, years=cfg.years, strict=cfg.strict)
    if panel.dropped:
        logger.warning("Unbalanced countries dropped", countries=sorted(panel.dropped))
    return panel


def load_run_weights(cfg: RunConfig, labels: Sequence[str]) -> WeightMatrix:
    """Weights from the configured source, in ``labels`` order."""
    if cfg.weights is not None:
        return load_weights(cfg.weights).align(labels)
    if cfg.flows is not None:
        return build_weights(load_flows(cfg.flows), labels, period=cfg.flow_period)
    raise UsageError("no weight source: pass --flows or --weights")


def _flow_labels(cfg: RunConfig) -> List[str]:
    if cfg.panel is not None:
        return list(load_run_panel(cfg).countries)
    if cfg.reference:
        return reference_countries()
    if cfg.flows is not None:
        flows = load_flows(cfg.flows)
        return sorted({f.origin for f in flows} | {f.dest for f in flows})
    return []


def export_weights(w: WeightMatrix, out: Path) -> List[Path]:
    """Write W and S as labelled CSV matrices and the network as GraphML."""
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create output directory {out}: {exc}") from exc
    files = [save_weights(w, out / "weight_matrix.csv")]
    if not w.has_base:
        logger.warning("Graph export skipped: proximity base unknown", hint="load the raw proximity matrix")
        return files
    return files + [proximity_path(files[0]), export_graph(w, out / "weight_matrix.graphml")]


def run_weights(cfg: RunConfig) -> Tuple[Report, WeightMatrix]:
    """Build or load W, then write the matrix and its graph next to the report."""
    with timed("weights") as stage:
        cfg.require_weight_source()
        if cfg.weights is not None and cfg.panel is None and not cfg.reference:
            w = load_weights(cfg.weights)
        else:
            w = load_run_weights(cfg, _flow_labels(cfg))
        files = export_weights(w, cfg.out)
        stage.update(countries=w.n, isolated=len(w.isolated))
    return weights_report(w, files), w


def run_autocorr(cfg: RunConfig, panel: Optional[PanelDataset] = None,
                 w: Optional[WeightMatrix] = None) -> Report:
    """Moran's I and Geary's C of CI growth, with optional permutation tests."""
    with timed("autocorr", permutations=cfg.permutations) as stage:
        panel = panel if panel is not None else load_run_panel(cfg)
        w = w if w is not None else load_run_weights(cfg, panel.countries)
        z = ci_growth(panel, cfg.growth)
        results: List[TestResult] = [morans_i(z, w), gearys_c(z, w)]
        if cfg.permutations:
            for statistic in ("I", "C"):
                results.append(permutation_test(z, w, statistic, reps=cfg.permutations,
                                                seed=derive_seed(cfg.seed, "autocorr", statistic)))
        stage["countries"] = panel.n
    return autocorr_report(results, panel.n)


def model_spec(kind: ModelKind, frame: RegressionFrame, w: Optional[WeightMatrix],
               spatial_lag: Sequence[str]) -> ModelSpec:
    """ModelSpec for one column of the fit table."""
    if kind is not ModelKind.SDM:
        return ModelSpec(kind, frame, w if kind.spatial else None)
    lagged = tuple(regressor_name(v) for v in spatial_lag if regressor_name(v) in frame.regressor_names)
    if not lagged:
        raise UsageError(f"none of the spatially lagged covariates {list(spatial_lag)} is in this block")
    return ModelSpec(kind, frame, w, lagged)


def fit_block(name: str, covariates: Tuple[str, ...], panel: PanelDataset, w: Optional[WeightMatrix],
              cfg: RunConfig, options: EstimationOptions) -> BlockFits:
    """Every requested model on one covariate block plus its specification tests."""
    frame = build_frame(panel, covariates)
    fits: Dict[str, FitResult] = {}
    for kind in cfg.model_kinds:
        fits[kind.value] = fit(model_spec(kind, frame, w, cfg.spatial_lag), options)

    tests: Dict[str, Dict[str, TestResult]] = {kind: {"wald": wald_test(result)} for kind, result in fits.items()}
    if "FE" in fits:
        try:
            re = fits.get("RE") or fit(ModelSpec(ModelKind.RE, frame), options)
            tests["FE"]["hausman"] = hausman_test(fits["FE"], re)
        except DimensionError as exc:
            logger.warning("Hausman test skipped", block=name, reason=str(exc))
    if "SDM" in fits:
        for restricted in ("SAR", "SEM"):
            if restricted not in fits:
                continue
            try:
                test = lr_test(fits[restricted], fits["SDM"])
            except NestingError as exc:
                # the SDM optimum fell below a model nested in it
                logger.warning("LR test skipped", block=name, restricted=restricted, reason=str(exc))
                continue
            tests["SDM"][test.name] = test
    return BlockFits(name=name, covariates=covariates, fits=fits, tests=tests)


def run_fit(cfg: RunConfig, panel: Optional[PanelDataset] = None,
            w: Optional[WeightMatrix] = None) -> Tuple[Report, List[BlockFits]]:
    with timed("fit", models=len(cfg.models)) as stage:
        panel = panel if panel is not None else load_run_panel(cfg)
        if w is None and cfg.needs_weights:
            w = load_run_weights(cfg, panel.countries)
        options = cfg.estimation_options()
        blocks = [fit_block(name, covariates, panel, w, cfg, options) for name, covariates in cfg.blocks()]
        stage["blocks"] = len(blocks)
    return fit_report(blocks), blocks


def run_effects(cfg: RunConfig, panel: Optional[PanelDataset] = None, w: Optional[WeightMatrix] = None,
                blocks: Optional[List[BlockFits]] = None) -> Report:
    """Effects with simulated inference and the convergence rate per fit."""
    if blocks is None:
        panel = panel if panel is not None else load_run_panel(cfg)
        if w is None and cfg.needs_weights:
            w = load_run_weights(cfg, panel.countries)
        _, blocks = run_fit(cfg, panel, w)
    results = []
    with timed("effects", blocks=len(blocks), draws=cfg.draws):
        for block in blocks:
            tables = {
                kind: effects_inference(result, w if result.rho is not None else None, draws=cfg.draws,
                                        seed=derive_seed(cfg.seed, "effects", block.name, kind))
                for kind, result in block.fits.items()
            }
            convergence = {kind: convergence_from_effects(table) for kind, table in tables.items()}
            results.append(BlockEffects(name=block.name, tables=tables, convergence=convergence))
    return effects_report(results)


def run_unitroot(cfg: RunConfig, panel: Optional[PanelDataset] = None) -> Report:
    with timed("unitroot", variables=len(INDICATORS)):
        panel = panel if panel is not None else load_run_panel(cfg)
        results = unitroot_table(panel, INDICATORS, lags=cfg.lags, trend=cfg.trend, log=cfg.unitroot_log)
    return unitroot_report(results)


def run_simulate(campaign: CampaignConfig) -> Report:
    with timed("simulate", reps=campaign.reps, workers=campaign.workers):
        report = run_campaign(campaign.sim, reps=campaign.reps, estimators=campaign.estimators,
                              workers=campaign.workers)
    return campaign_report(report)


def run_all(cfg: RunConfig) -> List[Report]:
    """weights -> autocorr -> unitroot -> fit -> effects from one RunConfig."""
    panel = load_run_panel(cfg)
    reports: List[Report] = []
    w: Optional[WeightMatrix] = None
    if cfg.flows is not None or cfg.weights is not None:
        w = load_run_weights(cfg, panel.countries)
        reports.append(weights_report(w, export_weights(w, cfg.out)))
        reports.append(run_autocorr(cfg, panel, w))
    elif cfg.needs_weights:
        raise UsageError("spatial models need a weight source: set flows or weights")
    reports.append(run_unitroot(cfg, panel))
    fit_rep, blocks = run_fit(cfg, panel, w)
    reports.append(fit_rep)
    reports.append(run_effects(cfg, panel, w, blocks))
    return reports
