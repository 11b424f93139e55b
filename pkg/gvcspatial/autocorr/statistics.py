"""
Global spatial autocorrelation: Moran's I and Geary's C.

Inference under the null of spatial randomness uses the normality moments
(Cliff and Ord). With S0 = sum_ij w_ij, S1 = 1/2 sum_ij (w_ij + w_ji)^2 and
S2 = sum_i (w_i. + w_.i)^2:

    E(I)   = -1 / (n - 1)
    E(I^2) = (n^2 S1 - n S2 + 3 S0^2) / (S0^2 (n^2 - 1))
    Var(I) = E(I^2) - E(I)^2

    E(C)   = 1
    Var(C) = ((2 S1 + S2)(n - 1) - 4 S0^2) / (2 (n + 1) S0^2)

A permutation test under the same null is available as a check on the
normal approximation.
"""

from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..core.errors import DegenerateWeightsError, DimensionError, DomainError, UsageError, ZeroVarianceError
from ..core.logging import get_logger
from ..core.results import TestResult
from ..data.panel import PanelDataset
from ..weights.matrix import WeightMatrix

logger = get_logger("autocorr")

Statistic = Literal["I", "C"]


@dataclass(frozen=True)
class _Moments:
    n: int
    s0: float
    s1: float
    s2: float


def _prepare(z: Sequence[float], w: WeightMatrix) -> Tuple[np.ndarray, np.ndarray]:
    values = np.asarray(z, dtype=float).ravel()
    if values.shape[0] != w.n:
        raise UsageError(f"{values.shape[0]} values for a {w.n}-country weight matrix")
    if w.n < 3:
        raise DimensionError("autocorrelation tests need at least 3 countries")
    if np.ptp(values) == 0:
        raise ZeroVarianceError("tested variable is constant")
    W = np.array(w.W)
    np.fill_diagonal(W, 0.0)
    if W.sum() <= 0:
        raise DegenerateWeightsError("weight matrix has no positive entry")
    return values, W


def _moments(W: np.ndarray) -> _Moments:
    n = W.shape[0]
    s0 = float(W.sum())
    s1 = float(0.5 * ((W + W.T) ** 2).sum())
    s2 = float(((W.sum(axis=1) + W.sum(axis=0)) ** 2).sum())
    return _Moments(n=n, s0=s0, s1=s1, s2=s2)


def _moran_value(values: np.ndarray, W: np.ndarray) -> float:
    dev = values - values.mean()
    return float(len(values) / W.sum() * (dev @ W @ dev) / (dev @ dev))


def _geary_value(values: np.ndarray, W: np.ndarray) -> float:
    n = len(values)
    dev = values - values.mean()
    diff2 = (values[:, None] - values[None, :]) ** 2
    return float((n - 1) * (W * diff2).sum() / (2.0 * W.sum() * (dev @ dev)))


def _two_tailed(name: str, statistic: float, expectation: float, variance: float) -> TestResult:
    if variance <= 0:
        logger.warning("Non-positive null variance", test=name, variance=variance)
        return TestResult(name=name, statistic=statistic, expectation=expectation,
                          sd=0.0, z=0.0, p_value=1.0)
    sd = float(np.sqrt(variance))
    z = (statistic - expectation) / sd
    return TestResult(
        name=name,
        statistic=statistic,
        expectation=expectation,
        sd=sd,
        z=float(z),
        p_value=float(2.0 * stats.norm.sf(abs(z))),
    )


def morans_i(z: Sequence[float], w: WeightMatrix) -> TestResult:
    """Moran's I with normal-approximation inference."""
    values, W = _prepare(z, w)
    m = _moments(W)
    n = m.n
    expectation = -1.0 / (n - 1)
    second = (n * n * m.s1 - n * m.s2 + 3.0 * m.s0**2) / (m.s0**2 * (n * n - 1))
    return _two_tailed("morans_i", _moran_value(values, W), expectation, second - expectation**2)


def gearys_c(z: Sequence[float], w: WeightMatrix) -> TestResult:
    """Geary's C with normal-approximation inference; C < 1 is positive autocorrelation."""
    values, W = _prepare(z, w)
    m = _moments(W)
    n = m.n
    variance = ((2.0 * m.s1 + m.s2) * (n - 1) - 4.0 * m.s0**2) / (2.0 * (n + 1) * m.s0**2)
    return _two_tailed("gearys_c", _geary_value(values, W), 1.0, variance)


def permutation_test(
    z: Sequence[float],
    w: WeightMatrix,
    statistic: Statistic = "I",
    reps: int = 999,
    seed: Optional[int] = None,
) -> TestResult:
    """Conditional randomisation test; two-tailed around the null expectation.

    p = (1 + #{|stat_perm - E| >= |stat_obs - E|}) / (reps + 1).
    """
    if reps < 99:
        raise UsageError(f"permutation test needs at least 99 replications, got {reps}")
    values, W = _prepare(z, w)
    n = len(values)
    compute: Callable[[np.ndarray, np.ndarray], float]
    if statistic == "I":
        compute, expectation, name = _moran_value, -1.0 / (n - 1), "morans_i"
    elif statistic == "C":
        compute, expectation, name = _geary_value, 1.0, "gearys_c"
    else:
        raise UsageError(f"Unknown statistic: {statistic}")

    observed = compute(values, W)
    rng = np.random.default_rng(seed)
    simulated = np.array([compute(rng.permutation(values), W) for _ in range(reps)])
    # relative slack absorbs rounding in ties
    extreme = np.abs(simulated - expectation) >= np.abs(observed - expectation) - 1e-12
    p_value = (1.0 + extreme.sum()) / (reps + 1.0)
    sd = float(simulated.std(ddof=1))
    # same reference as the p-value, so z = (statistic - expectation) / sd
    z_score = (observed - expectation) / sd if sd > 0 else 0.0
    return TestResult(
        name=name,
        statistic=observed,
        expectation=expectation,
        sd=sd,
        z=float(z_score),
        p_value=float(p_value),
        method="permutation",
        reps=reps,
    )


def ci_growth(panel: PanelDataset, method: Literal["total", "mean"] = "total") -> np.ndarray:
    """Per-country CI growth over the sample.

    ``total`` is ln(CI_last / CI_first); ``mean`` is the mean simple annual
    growth rate CI_t / CI_{t-1} - 1.
    """
    if panel.T < 2:
        raise DimensionError("CI growth needs at least two years")
    ci = panel.variable("CI")
    if not (ci > 0).all():
        i, t = np.argwhere(~(ci > 0))[0]
        raise DomainError(f"CI must be positive to compute growth: {panel.countries[i]} in {panel.years[t]}")
    if method == "total":
        return np.log(ci[:, -1] / ci[:, 0])
    if method == "mean":
        return (ci[:, 1:] / ci[:, :-1] - 1.0).mean(axis=1)
    raise UsageError(f"Unknown growth method: {method}")
