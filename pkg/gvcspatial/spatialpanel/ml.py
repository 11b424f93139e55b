"""
Maximum-likelihood spatial panel estimators with country fixed effects.

All three models work on within-demeaned data. Given the spatial parameter,
beta and sigma2 have closed forms, so the likelihood is concentrated to a
function of one scalar:

    SAR/SDM  y = rho W y + X beta + e
             ll(rho) = -NT/2 (ln 2pi + 1) - NT/2 ln s2(rho) + T sum_i ln|1 - rho w_i|
             with e(rho) = e0 - rho e1 from the two auxiliary regressions
             of y and W y on X.
    SEM      y = X beta + u,  u = lambda W u + e
             same form, s2(lambda) from least squares on the filtered data
             (I - lambda W) y and (I - lambda W) X.

The scalar is maximised by a coarse grid over the admissible interval
followed by a bounded Brent refinement inside the best grid cell. Standard
errors come from the expected information matrix at the optimum, or from a
numerical Hessian of the full likelihood when requested.
"""

from abc import abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg, optimize
from statsmodels.tools.numdiff import approx_hess3

from ..core.errors import BoundaryError, NumericalError, UsageError
from ..weights.matrix import WeightMatrix, lag_columns
from .base import (
    BaseEstimator,
    EstimationOptions,
    FitResult,
    ModelKind,
    ModelSpec,
    check_design,
    check_response,
    country_means,
    ols,
    pseudo_r2,
    within,
)

Profile = Callable[[float], float]


@dataclass(frozen=True)
class _Design:
    """Demeaned data of one spatial fit."""

    y: np.ndarray
    Wy: np.ndarray
    X: np.ndarray
    WX: np.ndarray
    raw_y: np.ndarray
    raw_X: np.ndarray
    names: Tuple[str, ...]
    gamma_names: Tuple[str, ...]
    w: WeightMatrix
    n: int
    T: int

    @property
    def N(self) -> int:
        return len(self.y)


def _const(N: int) -> float:
    return -0.5 * N * (np.log(2.0 * np.pi) + 1.0)


def _inverse(A: np.ndarray) -> np.ndarray:
    return linalg.lu_solve(linalg.lu_factor(A), np.eye(A.shape[0]))


class SpatialEstimator(BaseEstimator):
    """Shared machinery of the concentrated-likelihood estimators."""

    spatial_attr: str = "rho"

    def design(self, spec: ModelSpec) -> _Design:
        """Demean the data and check the regressors."""
        frame, w = spec.frame, spec.weights
        assert w is not None
        n = frame.n
        raw_X = frame.X
        gamma_names: Tuple[str, ...] = ()
        if spec.spatial_lag_regressors:
            lagged = lag_columns(w, frame.X[:, spec.lag_indices], n)
            raw_X = np.column_stack([frame.X, lagged])
            gamma_names = tuple(f"W*{name}" for name in spec.spatial_lag_regressors)
        names = frame.regressor_names + gamma_names

        y = within(frame.y, n)
        X = within(raw_X, n)
        check_response(y, frame.y)
        check_design(X, names, raw_X)
        if w.isolated:
            self.logger.warning("Isolated countries: their spatial lags are zero", isolated=list(w.isolated))
        return _Design(
            y=y,
            Wy=lag_columns(w, y, n),
            X=X,
            WX=lag_columns(w, X, n),
            raw_y=frame.y,
            raw_X=raw_X,
            names=frame.regressor_names,
            gamma_names=gamma_names,
            w=w,
            n=n,
            T=frame.T_eff,
        )

    @abstractmethod
    def profile(self, d: _Design) -> Profile:
        """Concentrated log-likelihood as a function of the spatial parameter."""
        pass

    @abstractmethod
    def solve(self, d: _Design, value: float) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients and innovations at a given spatial parameter."""
        pass

    @abstractmethod
    def information(self, d: _Design, value: float, coef: np.ndarray, sigma2: float) -> np.ndarray:
        """Expected information over [coef, spatial, sigma2]."""
        pass

    @abstractmethod
    def full_loglik(self, d: _Design) -> Callable[[np.ndarray], float]:
        """Unconcentrated log-likelihood over [coef, spatial, sigma2]."""
        pass

    @abstractmethod
    def structural(self, d: _Design, value: float, coef: np.ndarray) -> np.ndarray:
        """Undemeaned y net of the spatial and regressor terms."""
        pass

    def maximize(self, d: _Design) -> float:
        """Grid search then bounded refinement over the admissible interval."""
        lo, hi = d.w.admissible_interval
        profile = self.profile(d)
        width = hi - lo
        eps = self.options.boundary_tol * width
        grid = np.linspace(lo, hi, self.options.grid_points + 2)[1:-1]
        values = np.array([profile(v) for v in grid])
        if not np.isfinite(values).all():
            bad = grid[~np.isfinite(values)]
            raise NumericalError(
                f"non-finite concentrated likelihood for {self.spatial_attr} in {bad[:5].tolist()}"
            )
        best = int(np.argmax(values))
        left = grid[best - 1] if best > 0 else lo + 0.5 * eps
        right = grid[best + 1] if best < len(grid) - 1 else hi - 0.5 * eps
        result = optimize.minimize_scalar(
            lambda v: -profile(v),
            bounds=(left, right),
            method="bounded",
            options={"xatol": self.options.tol},
        )
        value = float(result.x)
        if not np.isfinite(result.fun):
            raise NumericalError(f"non-finite likelihood at {self.spatial_attr}={value}")
        if -result.fun < values[best]:
            value = float(grid[best])
        if min(value - lo, hi - value) <= eps:
            raise BoundaryError(
                f"{self.spatial_attr} estimate {value:.6f} is on the admissible bound ({lo:.6f}, {hi:.6f})"
            )
        return value

    def covariance(self, d: _Design, value: float, coef: np.ndarray, sigma2: float) -> np.ndarray:
        """Covariance over [coef, spatial, sigma2]."""
        if self.options.numerical_hessian:
            theta = np.concatenate([coef, [value, sigma2]])
            hessian = approx_hess3(theta, self.full_loglik(d))
            matrix = -hessian
        else:
            matrix = self.information(d, value, coef, sigma2)
        try:
            cov = linalg.inv(matrix)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"singular information matrix at {self.spatial_attr}={value}") from exc
        if not np.isfinite(cov).all() or np.any(np.diag(cov) <= 0):
            raise NumericalError(
                f"information matrix at {self.spatial_attr}={value} is not positive definite"
            )
        return cov

    def _fit(self, spec: ModelSpec) -> FitResult:
        d = self.design(spec)
        value = self.maximize(d)
        coef, resid = self.solve(d, value)
        loglik = float(self.profile(d)(value))
        sigma2 = float(resid @ resid) / d.N
        if self.options.lee_yu:
            sigma2 *= d.T / (d.T - 1.0)
        cov_full = self.covariance(d, value, coef, sigma2)

        K = len(coef)
        k = len(d.names)
        mu = country_means(self.structural(d, value, coef), d.n)
        fitted = d.raw_y - resid
        self.logger.info(
            f"{self.kind.value} fitted", **{self.spatial_attr: value}, loglik=loglik, sigma2=sigma2
        )
        spatial = {"rho": value} if self.spatial_attr == "rho" else {"lambda_": value}
        return FitResult(
            kind=self.kind,
            regressor_names=d.names,
            beta=coef[:k],
            gamma_names=d.gamma_names,
            gamma=coef[k:],
            cov=cov_full[: K + 1, : K + 1],
            sigma2=sigma2,
            se_sigma2=float(np.sqrt(cov_full[-1, -1])),
            loglik=loglik,
            residuals=resid,
            fitted=fitted,
            n=d.n,
            T_eff=d.T,
            frame_digest=spec.frame.digest,
            fixed_effects=mu,
            pseudo_r2=pseudo_r2(d.raw_y, fitted),
            metadata={
                "admissible_interval": list(d.w.admissible_interval),
                "lee_yu": self.options.lee_yu,
                "covariance": "numerical_hessian" if self.options.numerical_hessian else "information",
                "pseudo_r2": "corr(y, y - residual)^2",
            },
            **spatial,
        )


class SpatialLagEstimator(SpatialEstimator):
    """SAR: spatial lag of the dependent variable."""

    kind = ModelKind.SAR

    def _auxiliary(self, d: _Design) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        b0 = ols(d.X, d.y)
        b1 = ols(d.X, d.Wy)
        return b0, b1, d.y - d.X @ b0, d.Wy - d.X @ b1

    def profile(self, d: _Design) -> Profile:
        _, _, e0, e1 = self._auxiliary(d)
        ee00, ee01, ee11 = float(e0 @ e0), float(e0 @ e1), float(e1 @ e1)
        N, T, const = d.N, d.T, _const(d.N)

        def loglik(rho: float) -> float:
            s2 = (ee00 - 2.0 * rho * ee01 + rho * rho * ee11) / N
            if s2 <= 0:
                return -np.inf
            return const - 0.5 * N * np.log(s2) + T * d.w.log_det(rho)

        return loglik

    def solve(self, d: _Design, value: float) -> Tuple[np.ndarray, np.ndarray]:
        b0, b1, e0, e1 = self._auxiliary(d)
        return b0 - value * b1, e0 - value * e1

    def information(self, d: _Design, value: float, coef: np.ndarray, sigma2: float) -> np.ndarray:
        n, T, N = d.n, d.T, d.N
        K = len(coef)
        W = d.w.W
        Wt = W @ _inverse(np.eye(n) - value * W)
        wpred = ((d.X @ coef).reshape(T, n) @ Wt.T).ravel()
        info = np.zeros((K + 2, K + 2))
        info[:K, :K] = d.X.T @ d.X / sigma2
        info[:K, K] = info[K, :K] = d.X.T @ wpred / sigma2
        info[K, K] = T * (np.trace(Wt @ Wt) + np.trace(Wt.T @ Wt)) + wpred @ wpred / sigma2
        info[K, K + 1] = info[K + 1, K] = T * np.trace(Wt) / sigma2
        info[K + 1, K + 1] = N / (2.0 * sigma2**2)
        return info

    def full_loglik(self, d: _Design) -> Callable[[np.ndarray], float]:
        N, T = d.N, d.T

        def loglik(theta: np.ndarray) -> float:
            coef, rho, s2 = theta[:-2], theta[-2], theta[-1]
            e = d.y - rho * d.Wy - d.X @ coef
            return -0.5 * N * np.log(2.0 * np.pi * s2) + T * d.w.log_det(rho) - (e @ e) / (2.0 * s2)

        return loglik

    def structural(self, d: _Design, value: float, coef: np.ndarray) -> np.ndarray:
        return d.raw_y - value * lag_columns(d.w, d.raw_y, d.n) - d.raw_X @ coef


class SpatialDurbinEstimator(SpatialLagEstimator):
    """SDM: SAR with spatially lagged regressors appended to X."""

    kind = ModelKind.SDM


class SpatialErrorEstimator(SpatialEstimator):
    """SEM: spatially autocorrelated disturbances."""

    kind = ModelKind.SEM
    spatial_attr = "lambda"

    def solve(self, d: _Design, value: float) -> Tuple[np.ndarray, np.ndarray]:
        ys = d.y - value * d.Wy
        Xs = d.X - value * d.WX
        coef = ols(Xs, ys)
        return coef, ys - Xs @ coef

    def profile(self, d: _Design) -> Profile:
        N, T, const = d.N, d.T, _const(d.N)

        def loglik(lam: float) -> float:
            _, e = self.solve(d, lam)
            s2 = float(e @ e) / N
            if s2 <= 0:
                return -np.inf
            return const - 0.5 * N * np.log(s2) + T * d.w.log_det(lam)

        return loglik

    def information(self, d: _Design, value: float, coef: np.ndarray, sigma2: float) -> np.ndarray:
        n, T, N = d.n, d.T, d.N
        K = len(coef)
        W = d.w.W
        Wl = W @ _inverse(np.eye(n) - value * W)
        Xs = d.X - value * d.WX
        info = np.zeros((K + 2, K + 2))
        info[:K, :K] = Xs.T @ Xs / sigma2
        info[K, K] = T * (np.trace(Wl @ Wl) + np.trace(Wl.T @ Wl))
        info[K, K + 1] = info[K + 1, K] = T * np.trace(Wl) / sigma2
        info[K + 1, K + 1] = N / (2.0 * sigma2**2)
        return info

    def full_loglik(self, d: _Design) -> Callable[[np.ndarray], float]:
        N, T = d.N, d.T

        def loglik(theta: np.ndarray) -> float:
            coef, lam, s2 = theta[:-2], theta[-2], theta[-1]
            e = (d.y - lam * d.Wy) - (d.X - lam * d.WX) @ coef
            return -0.5 * N * np.log(2.0 * np.pi * s2) + T * d.w.log_det(lam) - (e @ e) / (2.0 * s2)

        return loglik

    def structural(self, d: _Design, value: float, coef: np.ndarray) -> np.ndarray:
        return d.raw_y - d.raw_X @ coef


SPATIAL_ESTIMATORS = {
    ModelKind.SAR: SpatialLagEstimator,
    ModelKind.SEM: SpatialErrorEstimator,
    ModelKind.SDM: SpatialDurbinEstimator,
}


def concentrated_loglik(spec: ModelSpec, value: float, options: Optional[EstimationOptions] = None) -> float:
    """Concentrated log-likelihood of a spatial spec at a fixed spatial parameter."""
    if not spec.kind.spatial:
        raise UsageError(f"{spec.kind.value} has no spatial parameter")
    assert spec.weights is not None
    if not spec.weights.is_admissible(value):
        raise UsageError(f"{value} is outside the admissible interval {spec.weights.admissible_interval}")
    estimator = SPATIAL_ESTIMATORS[spec.kind](options)
    return float(estimator.profile(estimator.design(spec))(value))


def fit_sar(spec: ModelSpec, options: Optional[EstimationOptions] = None) -> FitResult:
    """Spatial lag model."""
    return SpatialLagEstimator(options).fit(spec)


def fit_sem(spec: ModelSpec, options: Optional[EstimationOptions] = None) -> FitResult:
    """Spatial error model."""
    return SpatialErrorEstimator(options).fit(spec)


def fit_sdm(spec: ModelSpec, options: Optional[EstimationOptions] = None) -> FitResult:
    """Spatial Durbin model."""
    return SpatialDurbinEstimator(options).fit(spec)
