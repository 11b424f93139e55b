"""
Synthetic spatial panels from known SAR, SEM and SDM processes.

Per period t, with A = I - rho W and B = I - lambda W:

    SAR/SDM  y_t = A^-1 (X_t beta + W X_t[:, lagged] gamma + mu + e_t)
    SEM      y_t = X_t beta + mu + B^-1 e_t

Regressors follow a stationary AR(1) per country, e ~ N(0, sigma^2) and the
fixed effects mu ~ N(0, mu_scale^2).
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from ..core.errors import DomainError, UsageError
from ..core.logging import get_logger
from ..data.frame import CONVERGENCE_REGRESSOR, RegressionFrame
from ..weights.matrix import WeightMatrix, lag_columns, load_weights

logger = get_logger("montecarlo.simulate")

BURN_IN = 50


class SimConfig(BaseModel):
    """Data-generating process of one simulated panel."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n: int = Field(default=100, ge=3, description="Countries")
    T: int = Field(default=17, ge=3, description="Regression periods")
    model: Literal["SAR", "SEM", "SDM"] = "SDM"
    rho: float = Field(default=0.4, description="Spatial lag parameter (SAR, SDM)")
    lambda_: float = Field(default=0.5, alias="lambda", description="Spatial error parameter (SEM)")
    beta: List[float] = Field(default_factory=lambda: [-0.2, -0.05, 0.05])
    gamma: List[float] = Field(default_factory=lambda: [-0.16])
    lagged: Optional[List[int]] = Field(default=None, description="Regressor indices with a W lag; default last")
    sigma: float = Field(default=0.05, gt=0)
    mu_scale: float = Field(default=0.5, ge=0)
    ar_coef: float = Field(default=0.5, gt=-1, lt=1)
    degree: float = Field(default=6.0, gt=0, description="Expected number of random neighbours")
    weights_path: Optional[str] = None
    seed: Optional[int] = 0

    @model_validator(mode="after")
    def _consistent(self) -> "SimConfig":
        if not self.beta:
            raise ValueError("beta needs at least one coefficient")
        if self.model == "SDM":
            lagged = self.lag_indices
            if len(self.gamma) != len(lagged):
                raise ValueError(f"{len(self.gamma)} gamma values for {len(lagged)} lagged regressors")
            if any(not 0 <= j < len(self.beta) for j in lagged):
                raise ValueError(f"lagged indices {lagged} out of range for {len(self.beta)} regressors")
        return self

    @property
    def k(self) -> int:
        return len(self.beta)

    @property
    def lag_indices(self) -> List[int]:
        return list(self.lagged) if self.lagged is not None else [self.k - 1]

    @property
    def spatial(self) -> float:
        return self.lambda_ if self.model == "SEM" else self.rho

    @property
    def regressor_names(self) -> Tuple[str, ...]:
        return (CONVERGENCE_REGRESSOR,) + tuple(f"x{j}" for j in range(1, self.k))

    @property
    def lagged_names(self) -> Tuple[str, ...]:
        if self.model != "SDM":
            return ()
        return tuple(self.regressor_names[j] for j in self.lag_indices)

    def truth(self) -> Dict[str, float]:
        """True parameter values keyed by the names a fit reports."""
        values = dict(zip(self.regressor_names, self.beta))
        if self.model == "SDM":
            values.update({f"W*{name}": g for name, g in zip(self.lagged_names, self.gamma)})
        values["lambda" if self.model == "SEM" else "rho"] = self.spatial
        return values


@dataclass(frozen=True)
class Simulation:
    """A simulated frame with everything that generated it."""

    frame: RegressionFrame
    weights: WeightMatrix
    truth: Dict[str, float]
    shocks: np.ndarray
    mu: np.ndarray
    config: SimConfig

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "truth": dict(self.truth),
            "config": self.config.model_dump(by_alias=True),
            "frame": self.frame.to_dict(),
            "mu": self.mu.tolist(),
        }


def country_labels(n: int) -> Tuple[str, ...]:
    width = max(3, len(str(n)))
    return tuple(f"C{i + 1:0{width}d}" for i in range(n))


def random_weights(n: int, degree: float = 6.0, seed: Union[int, np.random.Generator, None] = None) -> WeightMatrix:
    """Symmetric random proximity on a ring plus random links, row-standardised.

    The ring keeps every country connected; extra links appear with
    probability degree / (n - 1) and all proximities are uniform on [0.5, 1.5].
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = min(1.0, degree / (n - 1))
    graph = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31 - 1)))
    graph.add_edges_from((i, (i + 1) % n) for i in range(n))
    S = np.zeros((n, n))
    for i, j in sorted(graph.edges()):
        if i != j:
            S[i, j] = S[j, i] = rng.uniform(0.5, 1.5)
    return WeightMatrix.from_proximity(country_labels(n), S)


def _regressors(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """T x n x k stationary AR(1) draws."""
    c = cfg.ar_coef
    x = rng.normal(0.0, 1.0 / np.sqrt(1.0 - c * c), size=(cfg.n, cfg.k))
    out = np.empty((cfg.T, cfg.n, cfg.k))
    for t in range(BURN_IN + cfg.T):
        x = c * x + rng.normal(size=(cfg.n, cfg.k))
        if t >= BURN_IN:
            out[t - BURN_IN] = x
    return out


def simulation_weights(cfg: SimConfig) -> WeightMatrix:
    """The weight matrix a config asks for: loaded from file or random."""
    if cfg.weights_path:
        w = load_weights(cfg.weights_path)
        if w.n != cfg.n:
            raise UsageError(f"weights file has {w.n} countries, config asks for {cfg.n}")
        return w
    return random_weights(cfg.n, cfg.degree, cfg.seed)


def simulate_panel(
    cfg: SimConfig,
    weights: Optional[WeightMatrix] = None,
    rng: Optional[np.random.Generator] = None,
) -> Simulation:
    """Draw one panel from the configured process."""
    w = weights if weights is not None else simulation_weights(cfg)
    if w.n != cfg.n:
        raise UsageError(f"weight matrix has {w.n} countries, config asks for {cfg.n}")
    if cfg.spatial != 0 and not w.is_admissible(cfg.spatial):
        lo, hi = w.admissible_interval
        raise DomainError(f"spatial parameter {cfg.spatial} outside the admissible interval ({lo:.4f}, {hi:.4f})")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    n, T, k = cfg.n, cfg.T, cfg.k
    X = _regressors(cfg, rng)
    mu = rng.normal(0.0, cfg.mu_scale, size=n) if cfg.mu_scale > 0 else np.zeros(n)
    shocks = rng.normal(0.0, cfg.sigma, size=(T, n))
    beta = np.asarray(cfg.beta)

    systematic = X @ beta + mu
    if cfg.model == "SDM":
        WX = np.einsum("ij,tjk->tik", w.W, X[:, :, cfg.lag_indices])
        systematic = systematic + WX @ np.asarray(cfg.gamma)
    factor = linalg.lu_factor(np.eye(n) - cfg.spatial * w.W)
    if cfg.model == "SEM":
        y = systematic + linalg.lu_solve(factor, shocks.T).T
    else:
        y = linalg.lu_solve(factor, (systematic + shocks).T).T

    frame = RegressionFrame(
        y=y.ravel(),
        X=X.reshape(T * n, k),
        regressor_names=cfg.regressor_names,
        countries=w.labels,
        years=tuple(range(1, T + 1)),
    )
    return Simulation(frame=frame, weights=w, truth=cfg.truth(), shocks=shocks.ravel(), mu=mu, config=cfg)


def recover_shocks(sim: Simulation) -> np.ndarray:
    """Plug the true parameters back into the model equation."""
    cfg, w, frame = sim.config, sim.weights, sim.frame
    n = frame.n
    mu = np.tile(sim.mu, frame.T_eff)
    beta = np.asarray(cfg.beta)
    if cfg.model == "SEM":
        u = frame.y - frame.X @ beta - mu
        return u - cfg.lambda_ * lag_columns(w, u, n)
    resid = frame.y - cfg.rho * lag_columns(w, frame.y, n) - frame.X @ beta - mu
    if cfg.model == "SDM":
        resid = resid - lag_columns(w, frame.X[:, cfg.lag_indices], n) @ np.asarray(cfg.gamma)
    return resid
