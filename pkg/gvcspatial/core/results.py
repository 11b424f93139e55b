"""
Shared result records and inference helpers.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class TestResult:
    """One test statistic with its null moments and p-value.

    For chi-squared tests ``expectation`` and ``sd`` are the null mean and
    standard deviation (df and sqrt(2 df)), so ``z`` keeps its meaning.
    """

    __test__ = False

    name: str
    statistic: float
    expectation: float
    sd: float
    z: float
    p_value: float
    tails: int = 2
    df: Optional[int] = None
    method: str = "normal"
    reps: Optional[int] = None
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "name": self.name,
            "statistic": self.statistic,
            "expectation": self.expectation,
            "sd": self.sd,
            "z": self.z,
            "p_value": self.p_value,
            "tails": self.tails,
            "df": self.df,
            "method": self.method,
            "reps": self.reps,
            "note": self.note,
        }


def chi2_result(name: str, statistic: float, df: int, method: str = "chi2",
                note: Optional[str] = None) -> TestResult:
    """Upper-tail chi-squared test record."""
    if df <= 0:
        return TestResult(name=name, statistic=statistic, expectation=0.0, sd=0.0,
                          z=0.0, p_value=1.0, tails=1, df=df, method=method, note=note)
    sd = float(np.sqrt(2.0 * df))
    return TestResult(
        name=name,
        statistic=float(statistic),
        expectation=float(df),
        sd=sd,
        z=float((statistic - df) / sd),
        p_value=float(stats.chi2.sf(statistic, df)),
        tails=1,
        df=df,
        method=method,
        note=note,
    )


def two_tailed_p(z: np.ndarray) -> np.ndarray:
    """Two-tailed standard normal p-values."""
    return 2.0 * stats.norm.sf(np.abs(z))


def significance_tier(p_value: Optional[float]) -> str:
    """a: p < .01, b: p < .05, c: p < .10, otherwise empty."""
    if p_value is None or not np.isfinite(p_value):
        return ""
    if p_value < 0.01:
        return "a"
    if p_value < 0.05:
        return "b"
    if p_value < 0.10:
        return "c"
    return ""
