"""
Levin-Lin-Chu panel unit-root test.

H0: every country's series has a unit root (common delta = 0).
H1: every series is stationary (common delta < 0).

Per country, Delta y and y_{t-1} are each regressed on p lagged
differences and the deterministic terms; the residuals are scaled by the
ADF regression standard error. The long-run variance of Delta y uses a
Bartlett kernel truncated at 3.21 T^(1/3), independent of p. The pooled
regression of the scaled residuals gives t_delta, which is corrected for
the ratio of long-run to short-run standard deviations and for the
finite-sample mean and variance of the tabulated adjustments:

    t* = (t_delta - N T~ S_N se(delta) mu*(T~) / sigma~^2) / sigma*(T~)

t* is standard normal under H0; the test is left-tailed.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.tsa.tsatools import lagmat

from ..core.errors import DimensionError, DomainError, UsageError, VarianceError
from ..core.logging import get_logger
from ..data.panel import INDICATORS, PanelDataset

logger = get_logger("unitroot")

Trend = Literal["n", "c", "ct"]
MIN_EXTRA_PERIODS = 6


@dataclass(frozen=True)
class LlcResult:
    """Adjusted t* with its left-tailed p-value."""

    adjusted_t: float
    p_value: float
    lags: Tuple[int, ...]
    n: int
    T: int
    trend: str = "c"
    variable: Optional[str] = None
    delta: float = float("nan")
    t_delta: float = float("nan")
    kernel_lags: int = 0
    S_N: float = float("nan")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "variable": self.variable,
            "adjusted_t": self.adjusted_t,
            "p_value": self.p_value,
            "lags": list(self.lags),
            "kernel_lags": self.kernel_lags,
            "n": self.n,
            "T": self.T,
            "trend": self.trend,
            "delta": self.delta,
            "t_delta": self.t_delta,
            "S_N": self.S_N,
        }


@lru_cache(maxsize=1)
def adjustment_table() -> pd.DataFrame:
    """Tabulated mean and standard deviation adjustments keyed by T~."""
    path = resources.files("gvcspatial.resources").joinpath("llc_adjustments.csv")
    with path.open("r", encoding="utf-8") as handle:
        return pd.read_csv(handle, comment="#")


def adjustments(T_tilde: float, trend: Trend) -> Tuple[float, float]:
    """mu* and sigma* interpolated at T~, clamped to the tabulated range."""
    table = adjustment_table()
    T_grid = table["T"].to_numpy(dtype=float)
    mu = float(np.interp(T_tilde, T_grid, table[f"mu_{trend}"].to_numpy(dtype=float)))
    sigma = float(np.interp(T_tilde, T_grid, table[f"sigma_{trend}"].to_numpy(dtype=float)))
    return mu, sigma


def auto_lags(T: int) -> int:
    """ceil(T^(1/4))."""
    return int(math.ceil(T**0.25))


def kernel_bandwidth(T: int) -> int:
    """Bartlett truncation 3.21 T^(1/3), rounded; the tabulated adjustments assume it."""
    return min(int(3.21 * T ** (1.0 / 3.0) + 0.5), max(T - 2, 0))


def _deterministics(rows: int, start: int, trend: Trend) -> np.ndarray:
    if trend == "n":
        return np.zeros((rows, 0))
    ones = np.ones((rows, 1))
    if trend == "c":
        return ones
    return np.column_stack([ones, np.arange(start, start + rows, dtype=float)])


def _residual(Z: np.ndarray, target: np.ndarray) -> np.ndarray:
    if Z.shape[1] == 0:
        return target
    return target - Z @ np.linalg.lstsq(Z, target, rcond=None)[0]


def _long_run_variance(dy: np.ndarray, K: int, trend: Trend) -> float:
    """Bartlett-kernel long-run variance of the first differences."""
    x = dy - dy.mean() if trend == "ct" else dy
    m = len(x)
    value = float(x @ x) / m
    for L in range(1, K + 1):
        weight = 1.0 - L / (K + 1.0)
        value += 2.0 * weight * float(x[L:] @ x[:-L]) / m
    return value


def llc_test(
    series: np.ndarray,
    lags: Union[int, Literal["auto"]] = "auto",
    trend: Trend = "c",
    kernel_lags: Optional[int] = None,
    variable: Optional[str] = None,
) -> LlcResult:
    """LLC test on an n x T balanced panel of one variable."""
    data = np.asarray(series, dtype=float)
    if data.ndim != 2:
        raise UsageError(f"expected an n x T panel, got shape {data.shape}")
    if trend not in ("n", "c", "ct"):
        raise UsageError(f"Unknown deterministic specification: {trend}")
    if not np.isfinite(data).all():
        raise DomainError(f"panel {variable or ''} has missing or infinite values".strip())
    n, T = data.shape
    p = auto_lags(T) if lags == "auto" else int(lags)
    if p < 0:
        raise UsageError(f"lag order must be non-negative, got {p}")
    if T < MIN_EXTRA_PERIODS + p:
        raise DimensionError(f"LLC with {p} lags needs T >= {MIN_EXTRA_PERIODS + p}, got {T}")
    K = kernel_bandwidth(T) if kernel_lags is None else int(kernel_lags)
    if not 0 <= K <= T - 2:
        raise UsageError(f"kernel lags must lie in [0, {T - 2}], got {K}")

    T_tilde = T - p - 1
    e_all: List[np.ndarray] = []
    v_all: List[np.ndarray] = []
    ratios = np.empty(n)
    for i in range(n):
        y = data[i]
        dy = np.diff(y)
        if np.ptp(y) == 0:
            raise VarianceError(f"series {i} of {variable or 'the panel'} is constant")
        lagged = lagmat(dy, p, trim="both") if p > 0 else np.zeros((T - 1, 0))
        Z = np.column_stack([lagged, _deterministics(T_tilde, p, trend)])
        e = _residual(Z, dy[p:])
        v = _residual(Z, y[p:-1])
        vv = float(v @ v)
        if vv <= 0:
            raise VarianceError(f"series {i} of {variable or 'the panel'} has no variation after detrending")
        delta_i = float(v @ e) / vv
        u = e - delta_i * v
        sigma_e = math.sqrt(float(u @ u) / T_tilde)
        if sigma_e <= 0:
            raise VarianceError(f"series {i} of {variable or 'the panel'} fits its ADF regression exactly")
        e_all.append(e / sigma_e)
        v_all.append(v / sigma_e)
        ratios[i] = math.sqrt(max(_long_run_variance(dy, K, trend), 0.0)) / sigma_e

    e_pool = np.concatenate(e_all)
    v_pool = np.concatenate(v_all)
    vv = float(v_pool @ v_pool)
    delta = float(v_pool @ e_pool) / vv
    resid = e_pool - delta * v_pool
    sigma2 = float(resid @ resid) / (n * T_tilde)
    se = math.sqrt(sigma2 / vv)
    t_delta = delta / se
    S_N = float(ratios.mean())
    mu_star, sigma_star = adjustments(T_tilde, trend)
    adjusted = (t_delta - n * T_tilde * S_N * se * mu_star / sigma2) / sigma_star
    p_value = float(stats.norm.cdf(adjusted))

    logger.debug("LLC test", variable=variable, t_star=adjusted, lags=p, n=n, T=T)
    return LlcResult(
        adjusted_t=float(adjusted),
        p_value=p_value,
        lags=(p,) * n,
        n=n,
        T=T,
        trend=trend,
        variable=variable,
        delta=delta,
        t_delta=float(t_delta),
        kernel_lags=K,
        S_N=S_N,
    )


def unitroot_table(
    panel: PanelDataset,
    variables: Sequence[str] = INDICATORS,
    lags: Union[int, Literal["auto"]] = "auto",
    trend: Trend = "c",
    log: bool = True,
) -> List[LlcResult]:
    """LLC test for each variable of a panel, in logs by default."""
    results = []
    for name in variables:
        values = panel.variable(name)
        if log:
            if not (values > 0).all():
                raise DomainError(f"ln({name}) undefined: non-positive values in the panel")
            values = np.log(values)
        label = f"ln({name})" if log else name
        results.append(llc_test(values, lags=lags, trend=trend, variable=label))
    return results
