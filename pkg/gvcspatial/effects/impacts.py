"""
Direct, indirect and total effects of spatial lag and Durbin fits.

For regressor k the matrix of partial derivatives of y with respect to x_k is

    S_k = (I - rho W)^-1 (beta_k I + gamma_k W)

The direct effect is the mean diagonal of S_k, the total effect its mean
row sum and the indirect effect the difference. Models without a spatial
lag of y (FE, RE, SEM) have S_k = beta_k I; their indirect effect is
reported as not applicable.

Point estimates use an LU solve of I - rho W. Simulated draws only need the
mean trace and row sum of M and MW, which come from the eigenvalues of W
without forming M.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from ..core.errors import InferenceError, SingularityError, UsageError
from ..core.logging import get_logger
from ..core.results import significance_tier, two_tailed_p
from ..spatialpanel.base import FitResult
from ..weights.matrix import WeightMatrix

logger = get_logger("effects")

MAX_REJECTED_SHARE = 0.5


def spatial_multiplier(rho: float, w: WeightMatrix) -> np.ndarray:
    """(I - rho W)^-1 by LU solve."""
    n = w.n
    if rho == 0:
        return np.eye(n)
    if not w.is_admissible(rho):
        lo, hi = w.admissible_interval
        raise SingularityError(f"rho={rho} is outside the admissible interval ({lo:.6f}, {hi:.6f})")
    return linalg.lu_solve(linalg.lu_factor(np.eye(n) - rho * w.W), np.eye(n))


def neumann_multiplier(rho: float, w: WeightMatrix, terms: int = 30) -> np.ndarray:
    """Partial sum I + rho W + ... + rho^(terms-1) W^(terms-1)."""
    if terms < 1:
        raise UsageError("at least one series term is needed")
    total = np.eye(w.n)
    power = np.eye(w.n)
    for _ in range(terms - 1):
        power = rho * (power @ w.W)
        total = total + power
    return total


def _regressor_index(fit: FitResult, regressor: Union[str, int]) -> int:
    if isinstance(regressor, int):
        if not 0 <= regressor < fit.k:
            raise UsageError(f"regressor index {regressor} out of range for {fit.k} regressors")
        return regressor
    try:
        return fit.regressor_names.index(regressor)
    except ValueError:
        raise UsageError(f"Unknown regressor: {regressor}") from None


def _gamma_full(fit: FitResult, gamma: np.ndarray) -> np.ndarray:
    """Spread gamma over all regressors, zero where no lag was fitted."""
    full = np.zeros(fit.k)
    for name, value in zip(fit.gamma_names, gamma):
        full[fit.regressor_names.index(name[2:])] = value
    return full


def _check_weights(fit: FitResult, w: Optional[WeightMatrix]) -> None:
    if w is None:
        if fit.rho is not None:
            raise UsageError(f"{fit.kind.value} effects need the weight matrix")
        return
    if w.n != fit.n:
        raise UsageError(f"weight matrix has {w.n} countries, fit has {fit.n}")


def effects_matrix(fit: FitResult, w: WeightMatrix, k: Union[str, int]) -> np.ndarray:
    """n x n partial derivative matrix of y with respect to regressor k."""
    _check_weights(fit, w)
    j = _regressor_index(fit, k)
    beta_k = fit.beta[j]
    gamma_k = _gamma_full(fit, fit.gamma)[j]
    M = spatial_multiplier(fit.rho, w) if fit.rho is not None else np.eye(w.n)
    return M @ (beta_k * np.eye(w.n) + gamma_k * w.W)


def _summaries(rho: Optional[float], w: Optional[WeightMatrix]) -> Tuple[float, float, float, float]:
    """tr(M)/n, tr(MW)/n, sum(M)/n, sum(MW)/n with M the multiplier."""
    if rho is None or w is None:
        return 1.0, 0.0, 1.0, 0.0
    n = w.n
    M = spatial_multiplier(rho, w)
    MW = M @ w.W
    return np.trace(M) / n, np.trace(MW) / n, M.sum() / n, MW.sum() / n


def multiplier_summaries(rhos: np.ndarray, w: WeightMatrix) -> np.ndarray:
    """Rows of (tr(M)/n, tr(MW)/n, sum(M)/n, sum(MW)/n), one per value of rho.

    With a symmetric proximity base the traces come from the cached
    eigenvalues of W, and the row sums follow from W having unit rows
    except for isolated countries, whose rows and columns are empty.
    """
    rhos = np.asarray(rhos, dtype=float)
    if not w.symmetric_base:
        return np.array([_summaries(float(rho), w) for rho in rhos]).reshape(len(rhos), 4)
    omega = w.eigenvalues
    inverse = 1.0 / (1.0 - np.outer(rhos, omega))
    connected = (w.n - len(w.isolated)) / w.n
    sum_mw = connected / (1.0 - rhos)
    return np.column_stack([inverse.mean(axis=1), (inverse * omega).mean(axis=1), sum_mw + 1.0 - connected, sum_mw])


def _effects(
    beta: np.ndarray, gamma: np.ndarray, rho: Optional[float], w: Optional[WeightMatrix]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    tr_m, tr_mw, sum_m, sum_mw = _summaries(rho, w)
    direct = beta * tr_m + gamma * tr_mw
    total = beta * sum_m + gamma * sum_mw
    return direct, total - direct, total


def _p_values(estimate: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """Two-tailed p; a point mass gives 0 for a nonzero estimate and 1 otherwise."""
    p = np.ones_like(estimate)
    spread = sd > 0
    p[spread] = two_tailed_p(estimate[spread] / sd[spread])
    p[~spread & (estimate != 0)] = 0.0
    return p


@dataclass(frozen=True)
class EffectsTable:
    """Per-regressor effects with optional simulated inference."""

    kind: str
    regressors: Tuple[str, ...]
    direct: np.ndarray
    indirect: np.ndarray
    total: np.ndarray
    indirect_applicable: bool
    se_direct: Optional[np.ndarray] = None
    se_indirect: Optional[np.ndarray] = None
    se_total: Optional[np.ndarray] = None
    p_direct: Optional[np.ndarray] = None
    p_indirect: Optional[np.ndarray] = None
    p_total: Optional[np.ndarray] = None
    draws: int = 0
    seed: Optional[int] = None
    rejected: int = 0

    def effect(self, regressor: str, which: str = "total") -> float:
        """Point effect of one regressor."""
        try:
            i = self.regressors.index(regressor)
        except ValueError:
            raise UsageError(f"Unknown regressor: {regressor}") from None
        return float(getattr(self, which)[i])

    def p_value(self, regressor: str, which: str = "total") -> Optional[float]:
        values = getattr(self, f"p_{which}")
        if values is None:
            return None
        return float(values[self.regressors.index(regressor)])

    def _cell(self, which: str, i: int) -> Optional[Dict[str, Any]]:
        if which == "indirect" and not self.indirect_applicable:
            return None
        se = getattr(self, f"se_{which}")
        p = getattr(self, f"p_{which}")
        p_value = None if p is None else float(p[i])
        return {
            "estimate": float(getattr(self, which)[i]),
            "se": None if se is None else float(se[i]),
            "p_value": p_value,
            "tier": significance_tier(p_value),
        }

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary; inapplicable indirect cells are null."""
        return {
            "kind": self.kind,
            "draws": self.draws,
            "seed": self.seed,
            "rejected": self.rejected,
            "effects": [
                {
                    "regressor": name,
                    "direct": self._cell("direct", i),
                    "indirect": self._cell("indirect", i),
                    "total": self._cell("total", i),
                }
                for i, name in enumerate(self.regressors)
            ],
        }


def decompose(fit: FitResult, w: Optional[WeightMatrix] = None) -> EffectsTable:
    """Point estimates of the direct, indirect and total effects."""
    _check_weights(fit, w)
    direct, indirect, total = _effects(fit.beta, _gamma_full(fit, fit.gamma), fit.rho, w)
    return EffectsTable(
        kind=fit.kind.value,
        regressors=fit.regressor_names,
        direct=direct,
        indirect=indirect,
        total=total,
        indirect_applicable=fit.rho is not None,
    )


def effects_inference(
    fit: FitResult,
    w: Optional[WeightMatrix] = None,
    draws: int = 1000,
    seed: Optional[int] = None,
) -> EffectsTable:
    """Simulated standard errors from the asymptotic normal of (beta, gamma, rho).

    Point estimates stay analytic; draws with an inadmissible rho are
    replaced by fresh ones.
    """
    if draws < 100:
        raise UsageError(f"effects inference needs at least 100 draws, got {draws}")
    point = decompose(fit, w)
    m = fit.k + len(fit.gamma) + (1 if fit.rho is not None else 0)
    mean = fit.coef[:m]
    cov = fit.cov[:m, :m]
    rng = np.random.default_rng(seed)

    accepted = []
    attempted = rejected = 0
    while sum(len(batch) for batch in accepted) < draws:
        batch = rng.multivariate_normal(mean, cov, size=draws)
        attempted += draws
        if fit.rho is not None:
            assert w is not None
            lo, hi = w.admissible_interval
            ok = (batch[:, -1] > lo) & (batch[:, -1] < hi)
            rejected += int((~ok).sum())
            if rejected > MAX_REJECTED_SHARE * attempted:
                raise InferenceError(
                    f"{rejected} of {attempted} rho draws fell outside ({lo:.4f}, {hi:.4f})"
                )
            batch = batch[ok]
        accepted.append(batch)
    samples = np.concatenate(accepted)[:draws]
    if rejected:
        logger.warning("Inadmissible rho draws redrawn", rejected=rejected, draws=draws)

    k, g = fit.k, len(fit.gamma)
    beta = samples[:, :k]
    gamma = np.zeros_like(beta)
    for name, column in zip(fit.gamma_names, samples[:, k:k + g].T):
        gamma[:, fit.regressor_names.index(name[2:])] = column
    if fit.rho is not None:
        assert w is not None
        summaries = multiplier_summaries(samples[:, -1], w)
    else:
        summaries = np.tile([1.0, 0.0, 1.0, 0.0], (draws, 1))
    direct = beta * summaries[:, [0]] + gamma * summaries[:, [1]]
    total = beta * summaries[:, [2]] + gamma * summaries[:, [3]]
    results = np.stack([direct, total - direct, total])

    se = results.std(axis=1, ddof=1)
    p = [_p_values(estimate, sd) for estimate, sd in zip((point.direct, point.indirect, point.total), se)]

    return EffectsTable(
        kind=point.kind,
        regressors=point.regressors,
        direct=point.direct,
        indirect=point.indirect,
        total=point.total,
        indirect_applicable=point.indirect_applicable,
        se_direct=se[0],
        se_indirect=se[1],
        se_total=se[2],
        p_direct=p[0],
        p_indirect=p[1],
        p_total=p[2],
        draws=draws,
        seed=seed,
        rejected=rejected,
    )
