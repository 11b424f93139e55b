"""
Row-standardised spatial weight matrices.

A WeightMatrix keeps the symmetric proximity base S next to the
row-standardised W. Since W = D^-1 S with D the row sums of S, W is similar
to the symmetric D^-1/2 S D^-1/2, so its eigenvalues are real and are
obtained from a symmetric eigensolver.
"""

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from ..core.errors import DegenerateWeightsError, ExportError, UsageError, WeightsValidationError
from ..core.logging import get_logger

logger = get_logger("weights.matrix")

ROW_SUM_TOL = 1e-12


def row_standardize(S: np.ndarray) -> np.ndarray:
    """Divide every row by its sum; all-zero rows stay zero."""
    S = np.asarray(S, dtype=float)
    sums = S.sum(axis=1)
    W = np.zeros_like(S)
    nonzero = sums > 0
    W[nonzero] = S[nonzero] / sums[nonzero, None]
    return W


def is_row_standardized(W: np.ndarray, tol: float = ROW_SUM_TOL) -> bool:
    """True when every nonzero row sums to one."""
    sums = np.asarray(W).sum(axis=1)
    active = np.abs(W).sum(axis=1) > 0
    return bool(np.all(np.abs(sums[active] - 1.0) <= tol))


@dataclass(frozen=True)
class WeightMatrix:
    """Labelled n x n row-standardised weights with their proximity base.

    ``has_base`` is False when only W was available; S then repeats W.
    """

    labels: Tuple[str, ...]
    W: np.ndarray
    S: np.ndarray
    symmetric_base: bool = True
    has_base: bool = True
    diagnostics: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        n = len(labels)
        if len(set(labels)) != n:
            raise WeightsValidationError("weight matrix labels must be unique")
        W = np.array(self.W, dtype=float)
        S = np.array(self.S, dtype=float)
        for name, M in (("W", W), ("S", S)):
            if M.shape != (n, n):
                raise WeightsValidationError(f"{name} has shape {M.shape}, expected {(n, n)}")
            if (M < 0).any():
                raise WeightsValidationError(f"{name} has negative entries")
            if np.any(np.diag(M) != 0):
                raise WeightsValidationError(f"{name} has a nonzero diagonal")
        if self.symmetric_base and not np.array_equal(S, S.T):
            raise WeightsValidationError("proximity base S is not symmetric")
        if not is_row_standardized(W):
            raise WeightsValidationError("W rows do not sum to one")
        if not np.array_equal(W > 0, S > 0):
            raise WeightsValidationError("W and S have different sparsity patterns")
        W.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))

    @classmethod
    def from_proximity(
        cls,
        labels: Sequence[str],
        S: np.ndarray,
        diagnostics: Optional[Mapping[str, int]] = None,
    ) -> "WeightMatrix":
        """Row-standardise a symmetric proximity matrix."""
        S = np.array(S, dtype=float)
        np.fill_diagonal(S, 0.0)
        w = cls(labels=tuple(labels), W=row_standardize(S), S=S, diagnostics=diagnostics or {})
        if w.isolated:
            logger.warning("Isolated countries in weight matrix", isolated=list(w.isolated))
        return w

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def isolated(self) -> Tuple[str, ...]:
        """Labels whose row carries no weight."""
        empty = self.W.sum(axis=1) == 0
        return tuple(label for label, flag in zip(self.labels, empty) if flag)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of W, computed once per matrix."""
        if self.symmetric_base:
            d = self.S.sum(axis=1)
            active = d > 0
            scale = 1.0 / np.sqrt(d[active])
            M = self.S[np.ix_(active, active)] * scale[:, None] * scale[None, :]
            values = np.concatenate([linalg.eigvalsh(M), np.zeros(int((~active).sum()))])
            return np.sort(values)
        values = linalg.eigvals(self.W)
        if np.max(np.abs(values.imag)) > 1e-10:
            logger.warning("Weight matrix has complex eigenvalues; using real parts for bounds")
        return np.sort(values.real)

    @cached_property
    def admissible_interval(self) -> Tuple[float, float]:
        """Open interval (1/omega_min, 1/omega_max) for rho and lambda."""
        if not np.any(self.W > 0):
            raise DegenerateWeightsError("weight matrix has no positive entry")
        values = self.eigenvalues
        w_min, w_max = float(values.min()), float(values.max())
        if w_min >= 0 or w_max <= 0:
            raise DegenerateWeightsError(f"eigenvalue range [{w_min}, {w_max}] does not straddle zero")
        return 1.0 / w_min, 1.0 / w_max

    def is_admissible(self, value: float) -> bool:
        """Whether a spatial parameter lies strictly inside the admissible interval."""
        lower, upper = self.admissible_interval
        return lower < value < upper

    def log_det(self, value: float) -> float:
        """ln|I - value W| from the cached eigenvalues."""
        return float(np.sum(np.log(np.abs(1.0 - value * self.eigenvalues))))

    def lag(self, values: np.ndarray) -> np.ndarray:
        """Spatial lag W x of a length-n vector or of each row of a T x n table."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return self.W @ values
        return values @ self.W.T

    def align(self, labels: Sequence[str]) -> "WeightMatrix":
        """Reorder rows and columns to the given label order."""
        labels = tuple(labels)
        if set(labels) != set(self.labels) or len(labels) != self.n:
            missing = sorted(set(labels) - set(self.labels))
            extra = sorted(set(self.labels) - set(labels))
            raise UsageError(f"weight labels do not match: missing {missing}, extra {extra}")
        if labels == self.labels:
            return self
        order = [self.labels.index(label) for label in labels]
        idx = np.ix_(order, order)
        return WeightMatrix(
            labels=labels,
            W=self.W[idx],
            S=self.S[idx],
            symmetric_base=self.symmetric_base,
            has_base=self.has_base,
            diagnostics=self.diagnostics,
        )

    def to_frame(self) -> pd.DataFrame:
        """W as a labelled DataFrame."""
        return pd.DataFrame(self.W, index=list(self.labels), columns=list(self.labels))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "labels": list(self.labels),
            "W": self.W.tolist(),
            "S": self.S.tolist(),
            "isolated": list(self.isolated),
            "has_base": self.has_base,
            "diagnostics": dict(self.diagnostics),
        }


def proximity_path(path: Union[str, Path]) -> Path:
    """Companion file holding the proximity base S of a saved W."""
    path = Path(path)
    return path.with_name(f"{path.stem}_proximity{path.suffix or '.csv'}")


def _read_matrix(path: Path) -> Tuple[List[str], np.ndarray]:
    try:
        frame = pd.read_csv(path, index_col=0)
    except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise WeightsValidationError(f"cannot read weight matrix {path}: {exc}") from exc
    rows = [str(label) for label in frame.index]
    cols = [str(label) for label in frame.columns]
    if frame.shape[0] != frame.shape[1]:
        raise WeightsValidationError(f"weight matrix is not square: {frame.shape}")
    if rows != cols:
        raise WeightsValidationError("row labels and column header differ")
    try:
        M = frame.to_numpy(dtype=float)
    except ValueError as exc:
        raise WeightsValidationError(f"non-numeric weight entries: {exc}") from exc
    if not np.isfinite(M).all():
        raise WeightsValidationError("weight matrix has missing or infinite entries")
    if (M < 0).any():
        raise WeightsValidationError("weight matrix has negative entries")
    if np.any(np.diag(M) != 0):
        logger.warning("Nonzero diagonal set to zero", path=str(path))
        np.fill_diagonal(M, 0.0)
    return rows, M


def load_weights(path: Union[str, Path]) -> WeightMatrix:
    """Read a labelled square matrix file.

    A matrix whose nonzero rows already sum to one is taken as W; its
    proximity base is read from the companion ``*_proximity.csv`` written by
    ``save_weights`` when that file exists. Anything else is taken as a raw
    proximity base: it must be symmetric and is row-standardised.
    """
    path = Path(path)
    rows, M = _read_matrix(path)

    if is_row_standardized(M) and M.any():
        companion = proximity_path(path)
        if companion.is_file():
            base_rows, S = _read_matrix(companion)
            if base_rows != rows:
                raise WeightsValidationError(f"{companion.name} labels differ from {path.name}")
            if not np.allclose(row_standardize(S), M, rtol=0.0, atol=1e-12):
                raise WeightsValidationError(f"{companion.name} does not standardise to {path.name}")
            return WeightMatrix(labels=tuple(rows), W=M, S=S, symmetric_base=bool(np.array_equal(S, S.T)))
        logger.warning("Standardised matrix loaded without its proximity base", path=str(path))
        return WeightMatrix(labels=tuple(rows), W=M, S=M, symmetric_base=bool(np.array_equal(M, M.T)),
                            has_base=False)
    if not np.array_equal(M, M.T):
        i, j = np.argwhere(M != M.T)[0]
        raise WeightsValidationError(
            f"raw proximity matrix is asymmetric: [{rows[i]}, {rows[j]}]={M[i, j]} vs {M[j, i]}"
        )
    return WeightMatrix.from_proximity(rows, M)


def save_weights(w: WeightMatrix, path: Union[str, Path]) -> Path:
    """Write W as a labelled CSV matrix, and S next to it when it is known."""
    path = Path(path)
    labels = list(w.labels)
    try:
        w.to_frame().to_csv(path, float_format="%.17g")
        if w.has_base:
            pd.DataFrame(w.S, index=labels, columns=labels).to_csv(proximity_path(path), float_format="%.17g")
    except OSError as exc:
        raise ExportError(f"cannot write weight matrix to {path}: {exc}") from exc
    return path


def lag_columns(w: WeightMatrix, X: np.ndarray, n: int) -> np.ndarray:
    """Spatially lag every column of a period-major stacked matrix."""
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    X2 = X[:, None] if squeeze else X
    T = X2.shape[0] // n
    lagged = np.einsum("ij,tjk->tik", w.W, X2.reshape(T, n, -1)).reshape(X2.shape)
    return lagged[:, 0] if squeeze else lagged


def isolated_report(w: WeightMatrix) -> List[str]:
    """Human-readable warnings for isolated countries."""
    return [f"country '{label}' has no trade neighbours (zero row)" for label in w.isolated]
