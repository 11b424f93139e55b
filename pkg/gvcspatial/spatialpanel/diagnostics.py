"""
Specification tests on fitted panel models: Wald, Hausman and likelihood ratio.
"""

import numpy as np
from scipy import linalg

from ..core.errors import NestingError, NumericalError, UsageError
from ..core.logging import get_logger
from ..core.results import TestResult, chi2_result
from .base import FitResult, ModelKind

logger = get_logger("spatialpanel.tests")

LR_TOLERANCE = 1e-6


def wald_test(fit: FitResult) -> TestResult:
    """Joint significance of all slope coefficients (beta and gamma).

    The spatial parameter is not restricted.
    """
    slopes = np.concatenate([fit.beta, fit.gamma])
    m = len(slopes)
    V = fit.cov[:m, :m]
    try:
        statistic = float(slopes @ linalg.solve(V, slopes, assume_a="pos"))
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"{fit.kind.value} coefficient covariance is singular") from exc
    if not np.isfinite(statistic):
        raise NumericalError(f"{fit.kind.value} Wald statistic is not finite")
    return chi2_result("wald", statistic, m)


def hausman_test(fe: FitResult, re: FitResult) -> TestResult:
    """Fixed versus random effects on the shared slope coefficients."""
    if fe.kind is not ModelKind.FE or re.kind is not ModelKind.RE:
        raise UsageError(f"Hausman test compares FE with RE, got {fe.kind.value} and {re.kind.value}")
    if fe.frame_digest != re.frame_digest or fe.regressor_names != re.regressor_names:
        raise UsageError("Hausman test needs both fits on the same frame and regressors")
    diff = fe.beta - re.beta
    V = fe.cov - re.cov
    if not np.any(diff):
        return chi2_result("hausman", 0.0, len(diff))
    eigenvalues = linalg.eigvalsh(V)
    if eigenvalues.min() <= 0:
        logger.warning("Covariance difference is not positive definite; using pseudo-inverse",
                       min_eigenvalue=float(eigenvalues.min()))
        statistic = float(diff @ linalg.pinvh(V) @ diff)
    else:
        statistic = float(diff @ linalg.solve(V, diff, assume_a="pos"))
    if statistic < 0:
        logger.warning("Negative Hausman statistic set to zero", statistic=statistic)
        statistic = 0.0
    return chi2_result("hausman", statistic, len(diff))


def lr_test(restricted: FitResult, unrestricted: FitResult) -> TestResult:
    """2 (ll_u - ll_r) with df the difference in parameter counts.

    SEM against an SDM that lags only some regressors is reported with a
    note: df counts the lagged regressors and the statistic is floored at 0.
    """
    if restricted.frame_digest != unrestricted.frame_digest:
        raise UsageError("likelihood ratio test needs both fits on the same frame")
    df = unrestricted.n_params - restricted.n_params
    if df < 0:
        raise UsageError(
            f"{unrestricted.kind.value} has fewer parameters than {restricted.kind.value}; swap the arguments"
        )
    note = None
    nested = True
    if restricted.kind is ModelKind.SEM and unrestricted.kind is ModelKind.SDM:
        unlagged = [name for name in unrestricted.regressor_names if f"W*{name}" not in unrestricted.gamma_names]
        if unlagged:
            # gamma = -rho beta only restricts the lagged regressors
            nested = False
            note = f"SEM is nested in SDM only through its W-lagged regressors; no W lag on {', '.join(unlagged)}"
    statistic = 2.0 * (unrestricted.loglik - restricted.loglik)
    if statistic < -LR_TOLERANCE:
        if nested:
            raise NestingError(
                f"{unrestricted.kind.value} loglik {unrestricted.loglik:.8f} is below "
                f"{restricted.kind.value} loglik {restricted.loglik:.8f}"
            )
        logger.warning("Negative LR statistic set to zero", statistic=statistic, note=note)
    return chi2_result(
        f"lr_{restricted.kind.value.lower()}_vs_{unrestricted.kind.value.lower()}",
        max(statistic, 0.0),
        df,
        note=note,
    )
