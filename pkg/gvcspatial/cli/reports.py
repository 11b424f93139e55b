"""
Report rendering: rich tables for reading, JSON and CSV for machines.

A Report carries one payload (JSON), one list of flat rows (CSV) and the
rich tables printed as text. Text cells are the machine values rounded to
DIGITS decimals; nothing time-dependent enters any output.
"""

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..core.errors import ExportError
from ..core.results import TestResult, significance_tier
from ..effects.convergence import ConvergenceReport
from ..effects.impacts import EffectsTable
from ..montecarlo.campaign import CampaignReport
from ..spatialpanel.base import FitResult
from ..unitroot.llc import LlcResult
from ..weights.matrix import WeightMatrix

DIGITS = 4
TEXT_WIDTH = 160
PRECISION_NOTE = f"values rounded to {DIGITS} decimals; the JSON and CSV reports carry full precision"
NOT_APPLICABLE = "n/a"

TEST_LABELS = {
    "wald": "Wald",
    "hausman": "Hausman",
    "lr_sar_vs_sdm": "LR SAR vs SDM",
    "lr_sem_vs_sdm": "LR SEM vs SDM",
}


@dataclass(frozen=True)
class Report:
    """One stage's output in every format."""

    name: str
    payload: Dict[str, Any]
    rows: List[Dict[str, Any]]
    tables: List[Table] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class BlockFits:
    """All fits and tests of one covariate block."""

    name: str
    covariates: Tuple[str, ...]
    fits: Dict[str, FitResult]
    tests: Dict[str, Dict[str, TestResult]]


@dataclass(frozen=True)
class BlockEffects:
    """Effects tables and convergence rates of one covariate block."""

    name: str
    tables: Dict[str, EffectsTable]
    convergence: Dict[str, ConvergenceReport]


def fmt(value: Optional[float]) -> str:
    if value is None:
        return NOT_APPLICABLE
    if isinstance(value, (int, np.integer)):
        return str(value)
    if not math.isfinite(value):
        return str(value)
    return f"{value:.{DIGITS}f}"


def _estimate_cell(estimate: float, se: Optional[float], p_value: Optional[float]) -> str:
    tier = significance_tier(p_value)
    text = f"{fmt(estimate)}{tier}"
    return f"{text}\n[{fmt(se)}]" if se is not None else text


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


def render_text(report: Report) -> str:
    """Plain text of a report's tables, fixed width, no colour."""
    console = Console(record=True, width=TEXT_WIDTH, file=io.StringIO(), color_system=None, highlight=False)
    for table in report.tables:
        console.print(table)
    for note in report.notes:
        console.print(note, markup=False)
    console.print(PRECISION_NOTE, markup=False)
    return console.export_text()


def write_report(report: Report, out_dir: Path, formats: Sequence[str], console: Optional[Console] = None) -> List[Path]:
    """Write a report in each format; text is also echoed to ``console``."""
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = out_dir / f"{report.name}.json"
            path.write_text(json.dumps(report.payload, sort_keys=True, indent=2, default=_jsonable) + "\n",
                            encoding="utf-8")
            written.append(path)
        if "csv" in formats:
            path = out_dir / f"{report.name}.csv"
            pd.DataFrame(report.rows).to_csv(path, index=False)
            written.append(path)
        if "text" in formats:
            text = render_text(report)
            path = out_dir / f"{report.name}.txt"
            path.write_text(text, encoding="utf-8")
            written.append(path)
            if console is not None:
                console.print(text, markup=False, highlight=False, end="")
    except OSError as exc:
        raise ExportError(f"cannot write {report.name} report to {out_dir}: {exc}") from exc
    return written


def weights_report(w: WeightMatrix, files: Sequence[Path]) -> Report:
    lo, hi = w.admissible_interval
    degree = w.S.sum(axis=1)
    rows = [
        {
            "country": label,
            "neighbours": int(np.count_nonzero(w.W[i])),
            "weighted_degree": float(degree[i]) if w.has_base else None,
            "row_sum": float(w.W[i].sum()),
            "isolated": label in w.isolated,
        }
        for i, label in enumerate(w.labels)
    ]
    table = Table(title=f"Trade-based spatial weights ({w.n} countries)")
    for column in ("Country", "Neighbours", "Weighted degree", "Row sum"):
        table.add_column(column, justify="left" if column == "Country" else "right")
    for row in rows:
        table.add_row(row["country"], str(row["neighbours"]), fmt(row["weighted_degree"]), fmt(row["row_sum"]))
    payload = {
        "n": w.n,
        "isolated": list(w.isolated),
        "admissible_interval": [lo, hi],
        "symmetric_base": w.symmetric_base,
        "has_base": w.has_base,
        "files": [path.name for path in files],
        "countries": rows,
    }
    notes = [f"admissible interval for rho: ({fmt(lo)}, {fmt(hi)})"]
    notes += [f"warning: country '{label}' has no trade neighbours (zero row)" for label in w.isolated]
    return Report("weights", payload, rows, [table], notes)


def autocorr_report(results: Sequence[TestResult], n: int) -> Report:
    """Statistic, expectation, standard deviation, z and p per row."""
    rows = [result.to_dict() for result in results]
    table = Table(title=f"Spatial autocorrelation of CI growth (n = {n})")
    for column in ("Statistic", "Method", "Value", "E(.)", "SD(.)", "Z", "p-value"):
        table.add_column(column, justify="left" if column in ("Statistic", "Method") else "right")
    for result in results:
        label = "Moran's I" if result.name == "morans_i" else "Geary's C"
        table.add_row(label, result.method, fmt(result.statistic), fmt(result.expectation),
                      fmt(result.sd), fmt(result.z), fmt(result.p_value))
    return Report("autocorr", {"n": n, "tests": rows}, rows, [table])


def _fit_rows(block: BlockFits) -> List[Dict[str, Any]]:
    rows = []
    for kind, result in block.fits.items():
        base = {"block": block.name, "model": kind}
        for name, estimate, se, p in zip(result.param_names, result.coef, result.se, result.p_values):
            rows.append({**base, "term": name, "estimate": float(estimate), "se": float(se),
                         "p_value": float(p), "tier": significance_tier(float(p))})
        rows.append({**base, "term": "sigma2", "estimate": result.sigma2, "se": result.se_sigma2,
                     "p_value": None, "tier": ""})
        rows.append({**base, "term": "loglik", "estimate": result.loglik, "se": None, "p_value": None, "tier": ""})
        rows.append({**base, "term": "pseudo_r2", "estimate": result.pseudo_r2, "se": None,
                     "p_value": None, "tier": ""})
        for name, test in block.tests.get(kind, {}).items():
            rows.append({**base, "term": name, "estimate": test.statistic, "se": None,
                         "p_value": test.p_value, "tier": significance_tier(test.p_value)})
    return rows


def _fit_table(block: BlockFits) -> Table:
    kinds = list(block.fits)
    table = Table(title=f"Spatial panel regressions, {block.name} ({', '.join(block.covariates)})")
    table.add_column("Variable")
    for kind in kinds:
        table.add_column(kind, justify="right")

    terms: List[str] = []
    for result in block.fits.values():
        terms += [name for name in result.param_names if name not in terms]
    for term in terms:
        cells = []
        for result in block.fits.values():
            if term in result.param_names:
                i = result.param_names.index(term)
                cells.append(_estimate_cell(float(result.coef[i]), float(result.se[i]), float(result.p_values[i])))
            else:
                cells.append("")
        table.add_row(term, *cells)

    table.add_section()
    table.add_row("sigma2", *[fmt(r.sigma2) for r in block.fits.values()])
    table.add_row("Log-likelihood", *[fmt(r.loglik) for r in block.fits.values()])
    table.add_row("Pseudo R2", *[fmt(r.pseudo_r2) for r in block.fits.values()])
    table.add_row("Observations", *[str(r.n * r.T_eff) for r in block.fits.values()])
    names = [name for name in TEST_LABELS if any(name in tests for tests in block.tests.values())]
    for name in names:
        cells = []
        for kind in kinds:
            test = block.tests.get(kind, {}).get(name)
            cells.append(_estimate_cell(test.statistic, None, test.p_value) if test else "")
        table.add_row(TEST_LABELS[name], *cells)
    return table


def fit_report(blocks: Sequence[BlockFits]) -> Report:
    payload = {
        "blocks": [
            {
                "name": block.name,
                "covariates": list(block.covariates),
                "fits": {kind: result.to_dict() for kind, result in block.fits.items()},
                "tests": {kind: {name: t.to_dict() for name, t in tests.items()} for kind, tests in block.tests.items()},
            }
            for block in blocks
        ]
    }
    rows = [row for block in blocks for row in _fit_rows(block)]
    notes = ["a: p < 0.01, b: p < 0.05, c: p < 0.10; standard errors in brackets"]
    notes += [
        f"{block.name}, {TEST_LABELS.get(name, name)}: {test.note}"
        for block in blocks
        for tests in block.tests.values()
        for name, test in tests.items()
        if test.note
    ]
    return Report("fit", payload, rows, [_fit_table(block) for block in blocks], notes)


def _effects_rows(block: BlockEffects) -> List[Dict[str, Any]]:
    rows = []
    for kind, table in block.tables.items():
        for i, regressor in enumerate(table.regressors):
            for which in ("direct", "indirect", "total"):
                applicable = which != "indirect" or table.indirect_applicable
                se = getattr(table, f"se_{which}")
                p = getattr(table, f"p_{which}")
                p_value = float(p[i]) if applicable and p is not None else None
                rows.append({
                    "block": block.name,
                    "model": kind,
                    "regressor": regressor,
                    "effect": which,
                    "estimate": float(getattr(table, which)[i]) if applicable else None,
                    "se": float(se[i]) if applicable and se is not None else None,
                    "p_value": p_value,
                    "tier": significance_tier(p_value),
                })
        report = block.convergence.get(kind)
        if report is not None:
            rows.append({"block": block.name, "model": kind, "regressor": "ln_CI_lag", "effect": "convergence_rate",
                         "estimate": report.rate, "se": None, "p_value": report.p_value,
                         "tier": significance_tier(report.p_value)})
    return rows


def _effects_table(block: BlockEffects) -> Table:
    kinds = list(block.tables)
    table = Table(title=f"Direct, indirect and total effects, {block.name}")
    table.add_column("Variable")
    table.add_column("Effect")
    for kind in kinds:
        table.add_column(kind, justify="right")
    regressors: List[str] = []
    for effects in block.tables.values():
        regressors += [name for name in effects.regressors if name not in regressors]
    for regressor in regressors:
        for which in ("direct", "indirect", "total"):
            cells = []
            for effects in block.tables.values():
                if regressor not in effects.regressors:
                    cells.append("")
                elif which == "indirect" and not effects.indirect_applicable:
                    cells.append(NOT_APPLICABLE)
                else:
                    i = effects.regressors.index(regressor)
                    se = getattr(effects, f"se_{which}")
                    p = getattr(effects, f"p_{which}")
                    cells.append(_estimate_cell(
                        float(getattr(effects, which)[i]),
                        float(se[i]) if se is not None else None,
                        float(p[i]) if p is not None else None,
                    ))
            table.add_row(regressor if which == "direct" else "", which, *cells)
        table.add_section()
    table.add_row("Convergence rate", "", *[fmt(block.convergence[k].rate) if k in block.convergence else NOT_APPLICABLE
                                            for k in kinds])
    return table


def effects_report(blocks: Sequence[BlockEffects]) -> Report:
    payload = {
        "blocks": [
            {
                "name": block.name,
                "effects": {kind: table.to_dict() for kind, table in block.tables.items()},
                "convergence": {kind: report.to_dict() for kind, report in block.convergence.items()},
            }
            for block in blocks
        ]
    }
    rows = [row for block in blocks for row in _effects_rows(block)]
    notes = ["convergence rate = -ln(1 + total effect of ln_CI_lag); n/a: no spatial lag of the dependent variable"]
    return Report("effects", payload, rows, [_effects_table(block) for block in blocks], notes)


def unitroot_report(results: Sequence[LlcResult]) -> Report:
    rows = [result.to_dict() for result in results]
    for row in rows:
        row["lags"] = max(row["lags"]) if row["lags"] else 0
    table = Table(title="Levin-Lin-Chu panel unit root tests")
    for column in ("Variable", "t*", "p-value", "Lags", "Trend", "N", "T"):
        table.add_column(column, justify="left" if column == "Variable" else "right")
    for result, row in zip(results, rows):
        table.add_row(result.variable or "", _estimate_cell(result.adjusted_t, None, result.p_value),
                      fmt(result.p_value), str(row["lags"]), result.trend, str(result.n), str(result.T))
    notes = ["H0: every series has a unit root; the test is left-tailed"]
    return Report("unitroot", {"tests": rows}, rows, [table], notes)


def campaign_report(report: CampaignReport) -> Report:
    rows = []
    for summary in report.summaries:
        for name in sorted(summary.bias):
            rows.append({"estimator": summary.kind, "parameter": name, "truth": report.truth[name],
                         "bias": summary.bias[name], "rmse": summary.rmse[name], "coverage": summary.coverage[name],
                         "mean": None, "sd": None})
        rows.append({"estimator": summary.kind, "parameter": "convergence_rate", "truth": None,
                     "bias": None, "rmse": None, "coverage": None, "mean": summary.mean_rate, "sd": summary.rate_sd})
    table = Table(title=f"Monte Carlo campaign ({report.reps} replications, seed {report.seed})")
    for column in ("Estimator", "Parameter", "Truth", "Bias", "RMSE", "Coverage 95%"):
        table.add_column(column, justify="left" if column in ("Estimator", "Parameter") else "right")
    for summary in report.summaries:
        for name in sorted(summary.bias):
            table.add_row(summary.kind, name, fmt(report.truth[name]), fmt(summary.bias[name]),
                          fmt(summary.rmse[name]), fmt(summary.coverage[name]))
        table.add_row(summary.kind, "mean convergence rate", "", fmt(summary.mean_rate), "", "")
        table.add_section()
    notes = [f"fits failed: {len(report.failures)}"]
    if report.fe_rate_below_sdm is not None:
        notes.append(f"FE convergence rate below SDM: {report.fe_rate_below_sdm}")
    return Report("campaign", report.to_dict(), rows, [table], notes)
