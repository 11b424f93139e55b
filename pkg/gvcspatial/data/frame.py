"""
Regression frames for the conditional convergence equation.

The dependent variable is the log growth of carbon intensity,
ln CI_t - ln CI_{t-1}; the regressors are lagged log levels. Observations
are stacked period by period with countries in panel order inside each
period, which is the layout the spatial estimators expect.
"""

import hashlib
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Sequence, Tuple

import numpy as np

from ..core.errors import DimensionError, DomainError, UsageError
from .panel import PanelDataset

COVARIATES: Tuple[str, ...] = ("Y", "EI", "UR", "GVC")

COVARIATE_BLOCKS: Dict[str, Tuple[str, ...]] = {
    "block1": ("Y", "EI", "GVC"),
    "block2": ("UR", "GVC"),
    "block3": ("EI", "UR", "GVC"),
    "block4": ("Y", "EI", "UR", "GVC"),
}

CONVERGENCE_REGRESSOR = "ln_CI_lag"


def regressor_name(variable: str) -> str:
    """Column label of a lagged log covariate."""
    return f"ln_{variable}_lag"


@dataclass(frozen=True)
class RegressionFrame:
    """Stacked dependent vector and regressor matrix, period-major."""

    y: np.ndarray
    X: np.ndarray
    regressor_names: Tuple[str, ...]
    countries: Tuple[str, ...]
    years: Tuple[int, ...]
    dependent_name: str = "ln_CI_growth"

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float).ravel()
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        rows = len(self.countries) * len(self.years)
        if y.shape[0] != rows or X.shape[0] != rows:
            raise DimensionError(f"frame has {y.shape[0]} observations, expected n*T_eff = {rows}")
        if X.shape[1] != len(self.regressor_names):
            raise DimensionError(f"{X.shape[1]} regressor columns but {len(self.regressor_names)} names")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return len(self.countries)

    @property
    def T_eff(self) -> int:
        return len(self.years)

    @property
    def k(self) -> int:
        return len(self.regressor_names)

    @property
    def convergence_regressor(self) -> str:
        return self.regressor_names[0]

    @property
    def digest(self) -> str:
        """Content hash used to check that two fits share their data."""
        h = hashlib.sha256()
        h.update(self.y.tobytes())
        h.update(self.X.tobytes())
        h.update("|".join(self.regressor_names + self.countries).encode("utf-8"))
        return h.hexdigest()

    def column(self, name: str) -> np.ndarray:
        """Get one regressor column."""
        try:
            return self.X[:, self.regressor_names.index(name)]
        except ValueError:
            raise UsageError(f"Unknown regressor: {name}") from None

    def as_panel(self, values: np.ndarray) -> np.ndarray:
        """Reshape a stacked vector to T_eff x n."""
        return np.asarray(values).reshape(self.T_eff, self.n)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "dependent": self.dependent_name,
            "regressors": list(self.regressor_names),
            "countries": list(self.countries),
            "years": list(self.years),
            "y": self.y.tolist(),
            "X": self.X.tolist(),
        }


def resolve_covariates(selection: Iterable[str]) -> Tuple[str, ...]:
    """Expand a block name or validate a custom covariate list, in canonical order."""
    items = list(selection)
    if len(items) == 1 and items[0] in COVARIATE_BLOCKS:
        return COVARIATE_BLOCKS[items[0]]
    unknown = [name for name in items if name not in COVARIATES]
    if unknown:
        raise UsageError(f"Unknown covariates {unknown}; choose from {list(COVARIATES)}")
    return tuple(name for name in COVARIATES if name in items)


def _log_checked(panel: PanelDataset, variable: str, periods: slice) -> np.ndarray:
    table = panel.variable(variable)[:, periods]
    bad = ~(table > 0)
    if bad.any():
        i, t = np.argwhere(bad)[0]
        year = panel.years[periods][t]
        raise DomainError(
            f"ln({variable}) undefined for {panel.countries[i]} in {year}: value {table[i, t]}"
        )
    return np.log(table)


def build_frame(panel: PanelDataset, covariates: Sequence[str]) -> RegressionFrame:
    """Assemble the growth regression frame for one covariate set."""
    chosen = resolve_covariates(covariates)
    if panel.T < 3:
        raise DimensionError(f"at least 3 periods are needed to build a frame, panel has {panel.T}")

    ln_ci = _log_checked(panel, "CI", slice(None))
    growth = ln_ci[:, 1:] - ln_ci[:, :-1]
    columns = [ln_ci[:, :-1]]
    for variable in chosen:
        columns.append(_log_checked(panel, variable, slice(0, panel.T - 1)))

    # n x T_eff tables -> period-major stacking
    y = growth.T.ravel()
    X = np.column_stack([table.T.ravel() for table in columns])
    names = (CONVERGENCE_REGRESSOR,) + tuple(regressor_name(v) for v in chosen)
    return RegressionFrame(
        y=y,
        X=X,
        regressor_names=names,
        countries=panel.countries,
        years=panel.years[1:],
    )
