"""
Base types for the panel estimators.

A ModelSpec pairs a regression frame with a model kind and, for the spatial
kinds, a weight matrix whose labels follow the frame's country order. Every
estimator returns a FitResult whose coefficient vector is ordered
[beta, gamma, spatial parameter] with the matching covariance matrix.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg

from ..core.errors import RankError, UsageError, VarianceError
from ..core.logging import get_logger
from ..core.results import significance_tier, two_tailed_p
from ..data.frame import RegressionFrame
from ..weights.matrix import WeightMatrix


class ModelKind(str, Enum):
    """Supported panel models."""

    FE = "FE"
    RE = "RE"
    SAR = "SAR"
    SEM = "SEM"
    SDM = "SDM"

    @property
    def spatial(self) -> bool:
        return self in (ModelKind.SAR, ModelKind.SEM, ModelKind.SDM)

    @classmethod
    def parse(cls, value: str) -> "ModelKind":
        try:
            return cls(value.strip().upper())
        except ValueError:
            raise UsageError(f"Unknown model: {value}; choose from {[k.value for k in cls]}") from None


@dataclass(frozen=True)
class ModelSpec:
    """What to estimate, on which data, with which weights."""

    kind: ModelKind
    frame: RegressionFrame
    weights: Optional[WeightMatrix] = None
    spatial_lag_regressors: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        kind = self.kind if isinstance(self.kind, ModelKind) else ModelKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        lagged = tuple(self.spatial_lag_regressors)
        object.__setattr__(self, "spatial_lag_regressors", lagged)

        if kind.spatial and self.weights is None:
            raise UsageError(f"{kind.value} needs a weight matrix")
        if lagged and kind is not ModelKind.SDM:
            raise UsageError(f"spatially lagged regressors are only allowed in SDM, not {kind.value}")
        if kind is ModelKind.SDM and not lagged:
            raise UsageError("SDM needs at least one spatially lagged regressor")
        unknown = [name for name in lagged if name not in self.frame.regressor_names]
        if unknown:
            raise UsageError(f"lagged regressors {unknown} are not in the frame")
        if len(set(lagged)) != len(lagged):
            raise UsageError("duplicate spatially lagged regressors")
        if self.weights is not None and self.weights.labels != self.frame.countries:
            raise UsageError("weight matrix labels are not in the frame's country order; align them first")

    @property
    def lag_indices(self) -> List[int]:
        return [self.frame.regressor_names.index(name) for name in self.spatial_lag_regressors]


class EstimationOptions(BaseModel):
    """Numerical settings shared by the estimators."""

    model_config = ConfigDict(frozen=True)

    grid_points: int = Field(default=100, ge=10, description="Coarse grid size over the admissible interval")
    tol: float = Field(default=1e-8, gt=0, description="Golden-section tolerance")
    boundary_tol: float = Field(default=1e-4, gt=0, description="Relative distance to a bound treated as boundary")
    lee_yu: bool = Field(default=False, description="Scale sigma2 by T/(T-1) in the spatial models")
    numerical_hessian: bool = Field(default=False, description="Numerical instead of analytic information matrix")


@dataclass(frozen=True)
class FitResult:
    """Estimates, covariance and fit statistics of one panel regression."""

    kind: ModelKind
    regressor_names: Tuple[str, ...]
    beta: np.ndarray
    cov: np.ndarray
    sigma2: float
    loglik: float
    residuals: np.ndarray
    fitted: np.ndarray
    n: int
    T_eff: int
    frame_digest: str
    gamma_names: Tuple[str, ...] = ()
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho: Optional[float] = None
    lambda_: Optional[float] = None
    se_sigma2: Optional[float] = None
    fixed_effects: Optional[np.ndarray] = None
    pseudo_r2: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.beta)

    @property
    def spatial_name(self) -> Optional[str]:
        if self.rho is not None:
            return "rho"
        if self.lambda_ is not None:
            return "lambda"
        return None

    @property
    def param_names(self) -> Tuple[str, ...]:
        names = self.regressor_names + self.gamma_names
        return names + ((self.spatial_name,) if self.spatial_name else ())

    @property
    def coef(self) -> np.ndarray:
        spatial = [self.rho if self.rho is not None else self.lambda_] if self.spatial_name else []
        return np.concatenate([self.beta, self.gamma, np.asarray(spatial, dtype=float)])

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def p_values(self) -> np.ndarray:
        se = self.se
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, self.coef / se, np.inf)
        return two_tailed_p(z)

    @property
    def n_params(self) -> int:
        """Estimated coefficients excluding sigma2 and the fixed effects."""
        return len(self.coef)

    def coefficient(self, name: str) -> float:
        """Point estimate by parameter name."""
        try:
            return float(self.coef[self.param_names.index(name)])
        except ValueError:
            raise UsageError(f"{self.kind.value} fit has no parameter {name}") from None

    def table(self) -> List[Dict[str, Any]]:
        """One row per parameter with estimate, se, p-value and tier."""
        rows = []
        for name, value, se, p in zip(self.param_names, self.coef, self.se, self.p_values):
            rows.append({
                "name": name,
                "estimate": float(value),
                "se": float(se),
                "p_value": float(p),
                "tier": significance_tier(float(p)),
            })
        return rows

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "kind": self.kind.value,
            "coefficients": self.table(),
            "sigma2": self.sigma2,
            "se_sigma2": self.se_sigma2,
            "loglik": self.loglik,
            "pseudo_r2": self.pseudo_r2,
            "n": self.n,
            "T_eff": self.T_eff,
            "k": self.k,
            "fixed_effects": None if self.fixed_effects is None else self.fixed_effects.tolist(),
            "cov": self.cov.tolist(),
            "metadata": dict(self.metadata),
        }


def within(values: np.ndarray, n: int) -> np.ndarray:
    """Subtract each country's time mean from a period-major stacked array."""
    values = np.asarray(values, dtype=float)
    T = values.shape[0] // n
    table = values.reshape((T, n) + values.shape[1:])
    return (table - table.mean(axis=0)).reshape(values.shape)


def country_means(values: np.ndarray, n: int) -> np.ndarray:
    """Per-country time means of a period-major stacked array."""
    values = np.asarray(values, dtype=float)
    return values.reshape((values.shape[0] // n, n) + values.shape[1:]).mean(axis=0)


def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients."""
    return linalg.lstsq(X, y)[0]


def check_design(X: np.ndarray, names: Tuple[str, ...], raw: Optional[np.ndarray] = None) -> None:
    """Reject regressors without variation and linearly dependent columns."""
    scale = np.abs(raw if raw is not None else X).max(axis=0)
    for j, name in enumerate(names):
        if np.abs(X[:, j]).max() <= 1e-12 * max(1.0, float(scale[j])):
            raise VarianceError(f"regressor '{name}' has no within variation")
    _, R, pivots = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(X.shape) * np.finfo(float).eps * diag[0]
    rank = int((diag > tol).sum())
    if rank < X.shape[1]:
        dependent = [names[j] for j in pivots[rank:]]
        raise RankError(f"regressors are collinear: {dependent}", dependent)


def check_response(y: np.ndarray, raw: np.ndarray) -> None:
    """Reject a dependent variable without variation."""
    if np.abs(y).max() <= 1e-12 * max(1.0, float(np.abs(raw).max())):
        raise VarianceError("dependent variable has no within variation")


def pseudo_r2(y: np.ndarray, fitted: np.ndarray) -> float:
    """Squared correlation between observed and fitted values."""
    if np.ptp(fitted) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(np.corrcoef(y, fitted)[0, 1] ** 2)


class BaseEstimator(ABC):
    """Abstract base class for the panel estimators."""

    kind: ModelKind

    def __init__(self, options: Optional[EstimationOptions] = None):
        self.options = options or EstimationOptions()
        self.logger = get_logger(f"spatialpanel.{self.kind.value.lower()}")

    def fit(self, spec: ModelSpec) -> FitResult:
        """Validate the spec and estimate the model."""
        if spec.kind is not self.kind:
            raise UsageError(f"{type(self).__name__} cannot fit a {spec.kind.value} spec")
        frame = spec.frame
        self.logger.debug(f"Fitting {self.kind.value}", n=frame.n, T_eff=frame.T_eff, k=frame.k)
        return self._fit(spec)

    @abstractmethod
    def _fit(self, spec: ModelSpec) -> FitResult:
        """Estimate the model."""
        pass
