"""
Panel ingestion for the carbon-intensity convergence pipeline.

Raw country-year observations are read from CSV, turned into the derived
indicators (carbon intensity, income per head, energy intensity,
urbanisation and GVC participation) and assembled into a balanced
country x year panel.
"""

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from ..core.errors import BalanceError, DomainError, IngestionError, UsageError
from ..core.logging import get_logger

logger = get_logger("data.panel")

INDICATORS: Tuple[str, ...] = ("CI", "Y", "EI", "UR", "GVC")
RAW_FIELDS: Tuple[str, ...] = (
    "co2", "gdp", "energy", "population", "urban_population",
    "dvx", "fva", "gross_exports",
)


@dataclass(frozen=True)
class RawPanelRow:
    """One country-year observation in source units."""

    country: str
    year: int
    co2: float
    gdp: float
    energy: float
    population: float
    urban_population: float
    dvx: float
    fva: float
    gross_exports: float

    def validate(self) -> None:
        """Check the sign and ordering constraints of a retained row."""
        label = f"{self.country}/{self.year}"
        for name in ("gdp", "population", "gross_exports"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive for {label}, got {getattr(self, name)}")
        for name in ("co2", "energy", "dvx", "fva", "urban_population"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative for {label}, got {getattr(self, name)}")
        if self.urban_population > self.population:
            raise DomainError(f"urban_population exceeds population for {label}")


@dataclass(frozen=True)
class IndicatorRecord:
    """Derived indicators for one country-year."""

    CI: float
    Y: float
    EI: float
    UR: float
    GVC: float

    def to_dict(self) -> Dict[str, float]:
        """Convert to dictionary."""
        return {name: getattr(self, name) for name in INDICATORS}


def compute_gvc(dvx: float, fva: float, gross_exports: float) -> float:
    """GVC participation: (indirect domestic + foreign value added) / gross exports."""
    if not gross_exports > 0:
        raise DomainError(f"gross_exports must be positive, got {gross_exports}")
    if dvx < 0 or fva < 0:
        raise DomainError(f"dvx and fva must be non-negative, got dvx={dvx}, fva={fva}")
    return (dvx + fva) / gross_exports


def derive_indicators(raw: RawPanelRow) -> IndicatorRecord:
    """Compute CI, Y, EI, UR and GVC from one raw row."""
    raw.validate()
    return IndicatorRecord(
        CI=raw.co2 / raw.gdp,
        Y=raw.gdp / raw.population,
        EI=raw.energy / raw.gdp,
        UR=raw.urban_population / raw.population,
        GVC=compute_gvc(raw.dvx, raw.fva, raw.gross_exports),
    )


class PanelSchema(BaseModel):
    """Maps logical panel fields to CSV column names.

    ``kind="raw"`` expects the source columns in RAW_FIELDS,
    ``kind="indicators"`` expects precomputed CI, Y, EI, UR and GVC.
    """

    kind: Literal["raw", "indicators"] = "raw"
    country: str = "country"
    year: str = "year"
    columns: Dict[str, str] = Field(default_factory=dict)

    def column(self, name: str) -> str:
        """Get the CSV column holding a logical field."""
        return self.columns.get(name, name)

    @property
    def value_fields(self) -> Tuple[str, ...]:
        return RAW_FIELDS if self.kind == "raw" else INDICATORS

    @classmethod
    def detect(cls, header: Sequence[str], overrides: Optional[Mapping[str, str]] = None) -> "PanelSchema":
        """Pick the schema kind from the columns present in a header."""
        overrides = dict(overrides or {})
        country = overrides.pop("country", "country")
        year = overrides.pop("year", "year")
        present = set(header)
        indicator_cols = {overrides.get(name, name) for name in INDICATORS}
        kind: Literal["raw", "indicators"] = "indicators" if indicator_cols <= present else "raw"
        return cls(kind=kind, country=country, year=year, columns=overrides)


@dataclass(frozen=True)
class PanelDataset:
    """Balanced country x year table of derived indicators."""

    countries: Tuple[str, ...]
    years: Tuple[int, ...]
    values: Mapping[str, np.ndarray]
    dropped: Mapping[str, Tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (len(self.countries), len(self.years))
        frozen = {}
        for name, table in self.values.items():
            array = np.array(table, dtype=float)
            if array.shape != shape:
                raise UsageError(f"{name} has shape {array.shape}, expected {shape}")
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, "values", frozen)
        if self.years and list(self.years) != list(range(self.years[0], self.years[0] + len(self.years))):
            raise BalanceError(f"years must be consecutive, got {list(self.years)}", {})

    @property
    def n(self) -> int:
        return len(self.countries)

    @property
    def T(self) -> int:
        return len(self.years)

    def variable(self, name: str) -> np.ndarray:
        """Get the n x T table of one indicator."""
        if name not in self.values:
            raise UsageError(f"Unknown panel variable: {name}")
        return self.values[name]

    def to_frame(self) -> pd.DataFrame:
        """Long-format view with one row per country-year."""
        index = pd.MultiIndex.from_product([self.countries, self.years], names=["country", "year"])
        return pd.DataFrame({name: table.ravel() for name, table in self.values.items()}, index=index)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "countries": list(self.countries),
            "years": list(self.years),
            "values": {name: table.tolist() for name, table in self.values.items()},
            "dropped": {country: list(years) for country, years in self.dropped.items()},
        }


def reference_countries() -> List[str]:
    """The 101-country sample, one label per line in the shipped resource file."""
    text = resources.files("gvcspatial.resources").joinpath("countries.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def _numeric_columns(df: pd.DataFrame, schema: PanelSchema) -> pd.DataFrame:
    out = pd.DataFrame(index=df.index)
    for name in (schema.year,) + tuple(schema.column(f) for f in schema.value_fields):
        parsed = pd.to_numeric(df[name], errors="coerce")
        bad = parsed.isna() | ~np.isfinite(parsed.astype(float))
        if bad.any():
            position = int(np.flatnonzero(bad.to_numpy())[0])
            # +2: header line plus 1-based numbering
            raise IngestionError(
                f"row {position + 2}: column '{name}' value {df[name].iloc[position]!r} is not a number"
            )
        out[name] = parsed.astype(float)
    return out


def load_panel(
    path: Union[str, Path],
    schema: Optional[PanelSchema] = None,
    years: Optional[Tuple[int, int]] = None,
    strict: bool = True,
) -> PanelDataset:
    """Read a panel CSV and return a balanced PanelDataset.

    With ``strict=True`` any country missing a year of the range raises
    BalanceError; otherwise such countries are dropped and listed in
    ``PanelDataset.dropped``.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"panel file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, encoding="utf-8", keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot parse {path}: {exc}") from exc

    schema = schema or PanelSchema.detect(list(df.columns))
    required = [schema.country, schema.year] + [schema.column(f) for f in schema.value_fields]
    missing = [name for name in required if name not in df.columns]
    if missing:
        raise IngestionError(f"{path.name}: missing columns {missing}")

    numeric = _numeric_columns(df, schema)
    countries = df[schema.country].str.strip()
    year_values = numeric[schema.year]
    if not (year_values == year_values.round()).all():
        position = int(np.flatnonzero((year_values != year_values.round()).to_numpy())[0])
        raise IngestionError(f"row {position + 2}: year {df[schema.year].iloc[position]!r} is not an integer")

    table = pd.DataFrame({"country": countries, "year": year_values.astype(int)})
    duplicated = table.duplicated(keep=False)
    if duplicated.any():
        pairs = sorted({(c, y) for c, y in table[duplicated].itertuples(index=False)})
        raise IngestionError(f"duplicate country/year rows: {pairs[:5]}")

    indicators: Dict[str, List[float]] = {name: [] for name in INDICATORS}
    for position, (country, year) in enumerate(table.itertuples(index=False)):
        if schema.kind == "raw":
            raw = RawPanelRow(
                country=country,
                year=int(year),
                **{f: float(numeric[schema.column(f)].iloc[position]) for f in RAW_FIELDS},
            )
            try:
                record = derive_indicators(raw).to_dict()
            except DomainError as exc:
                raise IngestionError(f"row {position + 2}: {exc}") from exc
        else:
            record = {f: float(numeric[schema.column(f)].iloc[position]) for f in INDICATORS}
            negative = [f for f, value in record.items() if value < 0]
            if negative:
                raise IngestionError(f"row {position + 2}: negative indicator values {negative}")
        for name in INDICATORS:
            indicators[name].append(record[name])
    for name in INDICATORS:
        table[name] = indicators[name]

    if years is None:
        if table.empty:
            raise IngestionError(f"{path.name}: no data rows")
        years = (int(table["year"].min()), int(table["year"].max()))
    start, end = years
    if start > end:
        raise UsageError(f"empty year range {start}-{end}")
    span = list(range(start, end + 1))
    table = table[(table["year"] >= start) & (table["year"] <= end)]

    gaps: Dict[str, Tuple[int, ...]] = {}
    for country, group in table.groupby("country", sort=True):
        absent = sorted(set(span) - set(group["year"]))
        if absent:
            gaps[str(country)] = tuple(absent)
    if gaps and strict:
        listing = "; ".join(f"{c}: {list(y)}" for c, y in gaps.items())
        raise BalanceError(f"unbalanced panel over {start}-{end}: {listing}", gaps)
    if gaps:
        logger.warning("Dropping unbalanced countries", dropped=sorted(gaps))
        table = table[~table["country"].isin(gaps)]
    if table.empty:
        raise BalanceError(f"no country is observed in every year of {start}-{end}", gaps)

    wide = table.set_index(["country", "year"]).sort_index()
    labels = tuple(sorted(table["country"].unique()))
    values = {
        name: wide[name].unstack("year").reindex(index=list(labels), columns=span).to_numpy()
        for name in INDICATORS
    }
    logger.info("Loaded panel", path=str(path), n=len(labels), T=len(span), dropped=len(gaps))
    return PanelDataset(countries=labels, years=tuple(span), values=values, dropped=gaps)
