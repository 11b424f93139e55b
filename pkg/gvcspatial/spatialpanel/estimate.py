"""
Model dispatch by kind.
"""

from typing import Dict, Optional, Type

from .base import BaseEstimator, EstimationOptions, FitResult, ModelKind, ModelSpec
from .fe import FixedEffectsEstimator, RandomEffectsEstimator
from .ml import SPATIAL_ESTIMATORS

ESTIMATORS: Dict[ModelKind, Type[BaseEstimator]] = {
    ModelKind.FE: FixedEffectsEstimator,
    ModelKind.RE: RandomEffectsEstimator,
    **SPATIAL_ESTIMATORS,
}


def fit(spec: ModelSpec, options: Optional[EstimationOptions] = None) -> FitResult:
    """Estimate ``spec`` with the estimator registered for its kind."""
    return ESTIMATORS[spec.kind](options).fit(spec)
