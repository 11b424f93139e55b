"""
Non-spatial panel estimators: the within (fixed-effects) estimator and the
Swamy-Arora random-effects GLS estimator used for the Hausman comparison.

Both are fitted by linearmodels on the frame indexed by (country, period);
the checks in front of it keep failures in the toolkit's error classes.
"""

from typing import Optional, Tuple

import numpy as np
import pandas as pd
from linearmodels.panel import PanelOLS, RandomEffects

from ..core.errors import DimensionError
from ..data.frame import RegressionFrame
from .base import (
    BaseEstimator,
    EstimationOptions,
    FitResult,
    ModelKind,
    ModelSpec,
    check_design,
    check_response,
    country_means,
    pseudo_r2,
    within,
)

CONSTANT = "const"


def panel_data(frame: RegressionFrame, constant: bool = False) -> Tuple[pd.Series, pd.DataFrame]:
    """Dependent and regressors with a (country, period) MultiIndex, rows in frame order."""
    index = pd.MultiIndex.from_arrays(
        [np.tile(np.asarray(frame.countries, dtype=object), frame.T_eff), np.repeat(np.arange(frame.T_eff), frame.n)],
        names=["country", "period"],
    )
    y = pd.Series(frame.y, index=index, name="y")
    X = pd.DataFrame(frame.X, index=index, columns=list(frame.regressor_names))
    if constant:
        X.insert(0, CONSTANT, 1.0)
    return y, X


def _check_within(frame: RegressionFrame) -> None:
    check_response(within(frame.y, frame.n), frame.y)
    check_design(within(frame.X, frame.n), frame.regressor_names, frame.X)


class FixedEffectsEstimator(BaseEstimator):
    """Least squares with absorbed country effects."""

    kind = ModelKind.FE

    def _fit(self, spec: ModelSpec) -> FitResult:
        frame = spec.frame
        n, N, k = frame.n, len(frame.y), frame.k
        _check_within(frame)
        dof = N - n - k
        if dof <= 0:
            raise DimensionError(f"{N} observations cannot identify {n} fixed effects and {k} slopes")

        y, X = panel_data(frame)
        res = PanelOLS(y, X, entity_effects=True).fit(cov_type="unadjusted", debiased=True)
        beta = res.params[list(frame.regressor_names)].to_numpy()
        cov = res.cov.loc[list(frame.regressor_names), list(frame.regressor_names)].to_numpy()

        resid = within(frame.y, n) - within(frame.X, n) @ beta
        ssr = float(resid @ resid)
        s2 = ssr / dof
        sigma2_ml = ssr / N
        loglik = -0.5 * N * (np.log(2.0 * np.pi) + 1.0 + np.log(sigma2_ml))
        mu = country_means(frame.y - frame.X @ beta, n)
        fitted = frame.y - resid

        self.logger.info("FE fitted", loglik=loglik, sigma2=s2)
        return FitResult(
            kind=self.kind,
            regressor_names=frame.regressor_names,
            beta=beta,
            cov=cov,
            sigma2=s2,
            se_sigma2=float(s2 * np.sqrt(2.0 / dof)),
            loglik=float(loglik),
            residuals=resid,
            fitted=fitted,
            n=n,
            T_eff=frame.T_eff,
            frame_digest=frame.digest,
            fixed_effects=mu,
            pseudo_r2=pseudo_r2(frame.y, fitted),
            metadata={"sigma2_ml": sigma2_ml, "dof": dof, "pseudo_r2": "corr(y, y - residual)^2"},
        )


class RandomEffectsEstimator(BaseEstimator):
    """Feasible GLS with Swamy-Arora variance components.

    A negative estimate of sigma2_mu is set to zero, which reduces the
    estimator to pooled least squares with an intercept.
    """

    kind = ModelKind.RE

    def _fit(self, spec: ModelSpec) -> FitResult:
        frame = spec.frame
        n, T, N, k = frame.n, frame.T_eff, len(frame.y), frame.k
        if n <= k + 1:
            raise DimensionError(f"between regression needs more than {k + 1} countries, got {n}")
        if N - n - k <= 0:
            raise DimensionError(f"{N} observations cannot identify the within variance")
        _check_within(frame)

        y, X = panel_data(frame, constant=True)
        res = RandomEffects(y, X).fit(cov_type="unadjusted", debiased=True)
        names = [CONSTANT] + list(frame.regressor_names)
        coef = res.params[names].to_numpy()
        cov_full = res.cov.loc[names, names].to_numpy()
        components = res.variance_decomposition
        sigma2_e = float(components["Residual"])
        sigma2_mu = float(components["Effects"])
        theta = float(np.asarray(res.theta).mean())
        clamped = sigma2_mu <= 0.0
        if clamped:
            self.logger.warning("Individual variance component is zero; RE equals pooled OLS")

        resid = frame.y - coef[0] - frame.X @ coef[1:]
        e_bar = country_means(resid, n)
        within_ss = float(((frame.as_panel(resid) - e_bar) ** 2).sum())
        between_ss = T * float(e_bar @ e_bar)
        composite = sigma2_e + T * sigma2_mu
        loglik = (
            -0.5 * N * np.log(2.0 * np.pi)
            - 0.5 * n * (T - 1) * np.log(sigma2_e)
            - 0.5 * n * np.log(composite)
            - within_ss / (2.0 * sigma2_e)
            - between_ss / (2.0 * composite)
        )
        fitted = frame.y - resid

        self.logger.info("RE fitted", theta=theta, sigma2_e=sigma2_e, sigma2_mu=sigma2_mu)
        return FitResult(
            kind=self.kind,
            regressor_names=frame.regressor_names,
            beta=coef[1:],
            cov=cov_full[1:, 1:],
            sigma2=sigma2_e,
            loglik=float(loglik),
            residuals=resid,
            fitted=fitted,
            n=n,
            T_eff=T,
            frame_digest=frame.digest,
            pseudo_r2=pseudo_r2(frame.y, fitted),
            metadata={
                "intercept": float(coef[0]),
                "intercept_se": float(np.sqrt(cov_full[0, 0])),
                "sigma2_mu": sigma2_mu,
                "theta": theta,
                "variance_clamped": bool(clamped),
                "pseudo_r2": "corr(y, y - residual)^2",
            },
        )


def fit_fe(spec: ModelSpec, options: Optional[EstimationOptions] = None) -> FitResult:
    """Fixed-effects (within) regression."""
    return FixedEffectsEstimator(options).fit(spec)


def fit_re(spec: ModelSpec, options: Optional[EstimationOptions] = None) -> FitResult:
    """Random-effects GLS regression."""
    return RandomEffectsEstimator(options).fit(spec)
