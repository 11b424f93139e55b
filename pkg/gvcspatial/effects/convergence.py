"""
Conditional convergence rate implied by the total effect of lagged ln CI.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from ..core.errors import DomainError
from ..core.logging import get_logger
from ..data.frame import CONVERGENCE_REGRESSOR
from .impacts import EffectsTable

logger = get_logger("effects.convergence")

SIGNIFICANCE_LEVEL = 0.05


@dataclass(frozen=True)
class ConvergenceReport:
    """Total effect B of the lagged level and the rate -ln(B + 1)."""

    B: float
    rate: float
    p_value: Optional[float] = None

    @property
    def significant(self) -> Optional[bool]:
        if self.p_value is None:
            return None
        return self.p_value < SIGNIFICANCE_LEVEL

    @property
    def converging(self) -> bool:
        return self.B < 0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {"B": self.B, "rate": self.rate, "p_value": self.p_value, "significant": self.significant}


def convergence_rate(B: float, p_value: Optional[float] = None) -> ConvergenceReport:
    """Rate -ln(B + 1); B in (-1, 0] means convergence."""
    if not np.isfinite(B) or B <= -1:
        raise DomainError(f"convergence rate needs B > -1, got {B}")
    if B > 0:
        logger.warning("Positive total effect of the lagged level: divergence", B=B)
    rate = float(-np.log1p(B)) + 0.0
    return ConvergenceReport(B=float(B), rate=rate, p_value=p_value)


def convergence_from_effects(table: EffectsTable, regressor: str = CONVERGENCE_REGRESSOR) -> ConvergenceReport:
    """Convergence report from the total effect in an effects table."""
    return convergence_rate(table.effect(regressor, "total"), table.p_value(regressor, "total"))
