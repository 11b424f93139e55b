"""
Exception hierarchy for gvc-spatial.

Every failure raised on purpose by the toolkit derives from GvcSpatialError
so callers (and the CLI) can separate domain failures from programming
errors.
"""

from typing import Dict, Sequence


class GvcSpatialError(Exception):
    """Base class for all toolkit errors."""


class UsageError(GvcSpatialError, ValueError):
    """Inconsistent arguments or an operation applied to the wrong input."""


class IngestionError(GvcSpatialError):
    """A panel or flow file could not be parsed."""


class BalanceError(GvcSpatialError):
    """The panel is not balanced over the requested years."""

    def __init__(self, message: str, gaps: Dict[str, Sequence[int]]):
        super().__init__(message)
        self.gaps = {country: tuple(years) for country, years in gaps.items()}


class DomainError(GvcSpatialError, ValueError):
    """A value lies outside the domain of a formula (log, ratio, rate)."""


class DimensionError(GvcSpatialError):
    """Too few countries or periods for the requested computation."""


class ConstructionError(GvcSpatialError):
    """A weight matrix cannot be built from the given flows."""


class WeightsValidationError(GvcSpatialError):
    """A weight matrix file violates the matrix invariants."""


class ExportError(GvcSpatialError, OSError):
    """An output file could not be written."""


class ZeroVarianceError(GvcSpatialError):
    """The tested variable is constant."""


class DegenerateWeightsError(GvcSpatialError):
    """The weight matrix has no positive entry."""


class RankError(GvcSpatialError):
    """Regressors are linearly dependent after the within transformation."""

    def __init__(self, message: str, columns: Sequence[str]):
        super().__init__(message)
        self.columns = tuple(columns)


class VarianceError(GvcSpatialError):
    """A variable has no within variation."""


class BoundaryError(GvcSpatialError):
    """The likelihood optimum sits on the admissible interval boundary."""


class NumericalError(GvcSpatialError):
    """Non-finite likelihood or a singular matrix where one must be invertible."""


class NestingError(GvcSpatialError):
    """Likelihoods of supposedly nested models are ordered the wrong way."""


class SingularityError(GvcSpatialError):
    """I - rho W is singular or rho lies outside the admissible interval."""


class InferenceError(GvcSpatialError):
    """Simulation-based inference could not collect enough valid draws."""


class CampaignError(GvcSpatialError):
    """A Monte Carlo campaign failed too often to be summarised."""
