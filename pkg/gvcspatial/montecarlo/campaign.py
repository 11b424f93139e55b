"""
Monte Carlo campaigns: repeated simulation and estimation with a fixed
weight matrix, summarised per estimator by bias, RMSE, 95% coverage and the
mean implied convergence rate.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import CampaignError, GvcSpatialError, UsageError
from ..core.logging import get_logger
from ..data.frame import RegressionFrame
from ..effects.convergence import convergence_rate
from ..effects.impacts import decompose
from ..spatialpanel.base import EstimationOptions, ModelKind, ModelSpec
from ..spatialpanel.estimate import fit
from ..weights.matrix import WeightMatrix
from .simulate import SimConfig, simulate_panel, simulation_weights

logger = get_logger("montecarlo.campaign")

DEFAULT_ESTIMATORS: Tuple[str, ...] = ("FE", "SAR", "SEM", "SDM")
MIN_REPS = 50
MAX_FAILURE_SHARE = 0.2
Z_95 = 1.959963984540054


@dataclass(frozen=True)
class EstimatorSummary:
    """Aggregates of one estimator over the successful replications."""

    kind: str
    fits: int
    failures: int
    bias: Dict[str, float]
    rmse: Dict[str, float]
    coverage: Dict[str, float]
    mean_rate: float
    rate_sd: float

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "kind": self.kind,
            "fits": self.fits,
            "failures": self.failures,
            "bias": dict(self.bias),
            "rmse": dict(self.rmse),
            "coverage": dict(self.coverage),
            "mean_rate": self.mean_rate,
            "rate_sd": self.rate_sd,
        }


@dataclass(frozen=True)
class CampaignReport:
    """Per-estimator summaries plus the recorded failures."""

    config: Dict[str, Any]
    reps: int
    seed: Optional[int]
    truth: Dict[str, float]
    summaries: Tuple[EstimatorSummary, ...]
    failures: Tuple[Dict[str, Any], ...] = field(default_factory=tuple)

    def summary(self, kind: str) -> EstimatorSummary:
        for item in self.summaries:
            if item.kind == kind:
                return item
        raise UsageError(f"campaign has no {kind} estimator")

    @property
    def fe_rate_below_sdm(self) -> Optional[bool]:
        """Whether FE's mean convergence rate is below SDM's; None without both."""
        kinds = {item.kind for item in self.summaries}
        if not {"FE", "SDM"} <= kinds:
            return None
        fe, sdm = self.summary("FE").mean_rate, self.summary("SDM").mean_rate
        if not (np.isfinite(fe) and np.isfinite(sdm)):
            return None
        return bool(fe < sdm)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "config": self.config,
            "reps": self.reps,
            "seed": self.seed,
            "truth": dict(self.truth),
            "estimators": [item.to_dict() for item in self.summaries],
            "failures": list(self.failures),
            "fe_rate_below_sdm": self.fe_rate_below_sdm,
        }


@dataclass(frozen=True)
class _Outcome:
    rep: int
    kind: str
    estimates: Dict[str, Tuple[float, float]]
    rate: float
    error: Optional[str] = None


def _spec(kind: str, sim_frame: RegressionFrame, w: WeightMatrix, cfg: SimConfig) -> ModelSpec:
    if kind == "SDM":
        lagged = cfg.lagged_names or tuple(cfg.regressor_names[j] for j in cfg.lag_indices)
        return ModelSpec(ModelKind.SDM, sim_frame, w, lagged)
    return ModelSpec(ModelKind.parse(kind), sim_frame, w if ModelKind.parse(kind).spatial else None)


def _replicate(
    rep: int,
    child: np.random.SeedSequence,
    cfg: SimConfig,
    w: WeightMatrix,
    estimators: Sequence[str],
    options: EstimationOptions,
) -> List[_Outcome]:
    sim = simulate_panel(cfg, weights=w, rng=np.random.default_rng(child))
    outcomes = []
    for kind in estimators:
        try:
            result = fit(_spec(kind, sim.frame, w, cfg), options)
            estimates = {
                name: (float(value), float(se))
                for name, value, se in zip(result.param_names, result.coef, result.se)
            }
            try:
                rate = convergence_rate(float(decompose(result, w).total[0])).rate
            except GvcSpatialError:
                rate = float("nan")
            outcomes.append(_Outcome(rep=rep, kind=kind, estimates=estimates, rate=rate))
        except GvcSpatialError as exc:
            outcomes.append(_Outcome(rep=rep, kind=kind, estimates={}, rate=float("nan"),
                                     error=f"{type(exc).__name__}: {exc}"))
    return outcomes


def _summarise(kind: str, outcomes: List[_Outcome], truth: Dict[str, float]) -> EstimatorSummary:
    ok = [o for o in outcomes if o.error is None]
    bias: Dict[str, float] = {}
    rmse: Dict[str, float] = {}
    coverage: Dict[str, float] = {}
    names = sorted({name for o in ok for name in o.estimates} & set(truth))
    for name in names:
        est = np.array([o.estimates[name][0] for o in ok])
        se = np.array([o.estimates[name][1] for o in ok])
        err = est - truth[name]
        bias[name] = float(err.mean())
        rmse[name] = float(np.sqrt((err**2).mean()))
        coverage[name] = float((np.abs(err) <= Z_95 * se).mean())
    rates = np.array([o.rate for o in ok], dtype=float)
    finite = rates[np.isfinite(rates)]
    return EstimatorSummary(
        kind=kind,
        fits=len(ok),
        failures=len(outcomes) - len(ok),
        bias=bias,
        rmse=rmse,
        coverage=coverage,
        mean_rate=float(finite.mean()) if finite.size else float("nan"),
        rate_sd=float(finite.std(ddof=1)) if finite.size > 1 else float("nan"),
    )


def run_campaign(
    cfg: SimConfig,
    reps: int = 200,
    estimators: Sequence[str] = DEFAULT_ESTIMATORS,
    workers: int = 1,
    options: Optional[EstimationOptions] = None,
) -> CampaignReport:
    """Simulate ``reps`` panels and fit every estimator on each.

    The weight matrix is drawn once; replication r uses the r-th child of
    SeedSequence(cfg.seed), so results do not depend on ``workers``.
    """
    if reps < MIN_REPS:
        raise UsageError(f"a campaign needs at least {MIN_REPS} replications, got {reps}")
    kinds = [ModelKind.parse(kind).value for kind in estimators]
    if not kinds:
        raise UsageError("no estimators requested")
    options = options or EstimationOptions()
    w = simulation_weights(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(reps)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_replicate, r, child, cfg, w, kinds, options) for r, child in enumerate(children)]
            batches = [future.result() for future in futures]
    else:
        batches = [_replicate(r, child, cfg, w, kinds, options) for r, child in enumerate(children)]
    outcomes = [o for batch in batches for o in batch]

    failures = tuple(
        {"rep": o.rep, "estimator": o.kind, "error": o.error} for o in outcomes if o.error is not None
    )
    for failure in failures:
        logger.warning("Replication fit failed", **failure)
    share = len(failures) / len(outcomes)
    if share > MAX_FAILURE_SHARE:
        raise CampaignError(f"{len(failures)} of {len(outcomes)} fits failed ({share:.0%})")

    truth = cfg.truth()
    summaries = tuple(_summarise(kind, [o for o in outcomes if o.kind == kind], truth) for kind in kinds)
    report = CampaignReport(
        config=cfg.model_dump(by_alias=True),
        reps=reps,
        seed=cfg.seed,
        truth=truth,
        summaries=summaries,
        failures=failures,
    )
    logger.info("Campaign finished", reps=reps, failures=len(failures), fe_rate_below_sdm=report.fe_rate_below_sdm)
    return report
