"""
Economic-distance weights from bilateral value-added trade.

Proximity between two countries is the total value added they exported to
each other over the aggregation window; the resulting symmetric base is
row-standardised. One window for the whole sample keeps the matrix
time-invariant.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.errors import ConstructionError, IngestionError, UsageError
from ..core.logging import get_logger
from .matrix import WeightMatrix

logger = get_logger("weights.build")

FLOW_COLUMNS: Tuple[str, ...] = ("origin", "dest", "year", "value")


@dataclass(frozen=True)
class FlowRecord:
    """Value added exported from origin to dest in one year."""

    origin: str
    dest: str
    year: int
    value: float

    def to_dict(self) -> Dict[str, object]:
        """Convert to dictionary."""
        return {"origin": self.origin, "dest": self.dest, "year": self.year, "value": self.value}


def load_flows(path: Union[str, Path]) -> List[FlowRecord]:
    """Read a flow CSV with columns origin, dest, year, value."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"flow file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype={"origin": str, "dest": str}, encoding="utf-8")
    except pd.errors.EmptyDataError:
        return []
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot parse {path}: {exc}") from exc
    missing = [name for name in FLOW_COLUMNS if name not in frame.columns]
    if missing:
        raise IngestionError(f"{path.name}: missing columns {missing}")
    for name in ("year", "value"):
        parsed = pd.to_numeric(frame[name], errors="coerce")
        if parsed.isna().any():
            position = int(np.flatnonzero(parsed.isna().to_numpy())[0])
            raise IngestionError(f"row {position + 2}: column '{name}' is not a number")
        frame[name] = parsed
    return [
        FlowRecord(origin=str(o).strip(), dest=str(d).strip(), year=int(y), value=float(v))
        for o, d, y, v in frame[list(FLOW_COLUMNS)].itertuples(index=False)
    ]


def build_weights(
    flows: Sequence[FlowRecord],
    labels: Sequence[str],
    period: Optional[Tuple[int, int]] = None,
    strict_labels: bool = False,
) -> WeightMatrix:
    """Aggregate bilateral flows over ``period`` into a row-standardised matrix.

    S_ij = sum over the window of exports(i->j) + exports(j->i). Flows whose
    countries are not in ``labels`` are dropped (or rejected when
    ``strict_labels``); duplicate (origin, dest, year) records are summed.
    """
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise UsageError("labels must be unique")
    if not flows:
        raise ConstructionError("no flow records")

    table = pd.DataFrame([f.to_dict() for f in flows])
    if (table["value"] < 0).any() or not np.isfinite(table["value"]).all():
        raise ConstructionError("flow values must be finite and non-negative")
    if period is not None:
        start, end = period
        if start > end:
            raise UsageError(f"empty aggregation period {start}-{end}")
        table = table[(table["year"] >= start) & (table["year"] <= end)]
        if table.empty:
            raise ConstructionError(f"no flow records in period {start}-{end}")

    known = table["origin"].isin(labels) & table["dest"].isin(labels)
    excluded = int((~known).sum())
    if excluded and strict_labels:
        unknown = sorted((set(table.loc[~known, "origin"]) | set(table.loc[~known, "dest"])) - set(labels))
        raise ConstructionError(f"flows reference unknown countries: {unknown[:10]}")
    self_flows = int((table["origin"] == table["dest"]).sum())
    table = table[known & (table["origin"] != table["dest"])]
    if table.empty:
        raise ConstructionError("no flow records between the listed countries")

    duplicates = int(table.duplicated(subset=["origin", "dest", "year"]).sum())
    if duplicates:
        logger.warning("Duplicate flow records summed", duplicates=duplicates)
    if excluded:
        logger.warning("Flows outside the label set excluded", excluded=excluded)

    exports = (
        table.groupby(["origin", "dest"])["value"].sum()
        .unstack("dest")
        .reindex(index=list(labels), columns=list(labels))
        .fillna(0.0)
        .to_numpy()
    )
    S = exports + exports.T
    np.fill_diagonal(S, 0.0)
    diagnostics = {"duplicates": duplicates, "excluded": excluded, "self_flows": self_flows}
    w = WeightMatrix.from_proximity(labels, S, diagnostics=diagnostics)
    logger.info("Built weight matrix", n=w.n, isolated=len(w.isolated), **diagnostics)
    return w
