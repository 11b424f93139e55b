"""
Run and campaign configuration for the command-line surface.

Both are plain-text ``key=value`` files read with python-dotenv and
validated by pydantic. Relative paths inside a file are resolved against
the file's directory. Command-line flags override file values.
"""

import re
import zlib
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.errors import UsageError
from ..data.frame import COVARIATE_BLOCKS, resolve_covariates
from ..montecarlo.campaign import DEFAULT_ESTIMATORS
from ..montecarlo.simulate import SimConfig
from ..spatialpanel.base import EstimationOptions, ModelKind

Format = Literal["json", "csv", "text"]

PATH_KEYS = ("panel", "flows", "weights", "out", "weights_path")


def _split(value: Any, pattern: str = r"[,\s]+") -> Any:
    if isinstance(value, str):
        return [item for item in re.split(pattern, value.strip()) if item]
    return value


def _year_range(value: Any) -> Any:
    if isinstance(value, str):
        match = re.fullmatch(r"\s*(\d{4})\s*[-:]\s*(\d{4})\s*", value)
        if not match:
            raise ValueError(f"expected a year range like 1997-2014, got {value!r}")
        return int(match.group(1)), int(match.group(2))
    return value


def parse_columns(items: Union[str, List[str], Mapping[str, str], None]) -> Dict[str, str]:
    """``key=name`` pairs to a schema override mapping."""
    if items is None:
        return {}
    if isinstance(items, Mapping):
        return dict(items)
    pairs = _split(items) if isinstance(items, str) else items
    out: Dict[str, str] = {}
    for pair in pairs:
        key, sep, name = pair.partition("=")
        if not sep or not key or not name:
            raise UsageError(f"column override must look like key=name, got {pair!r}")
        out[key.strip()] = name.strip()
    return out


class RunConfig(BaseModel):
    """Inputs, model choices, seeds and outputs of one pipeline run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    panel: Optional[Path] = None
    flows: Optional[Path] = None
    weights: Optional[Path] = None
    flow_period: Optional[Tuple[int, int]] = Field(default=None, description="Years aggregated into the weights")
    years: Optional[Tuple[int, int]] = Field(default=None, description="Panel year range")
    columns: Dict[str, str] = Field(default_factory=dict, description="Schema overrides, logical field -> CSV column")
    strict: bool = Field(default=True, description="Reject unbalanced panels instead of dropping countries")
    reference: bool = Field(default=False, description="Label weights with the shipped 101-country list")
    covariates: List[str] = Field(default_factory=lambda: list(COVARIATE_BLOCKS))
    models: List[str] = Field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    spatial_lag: List[str] = Field(default_factory=lambda: ["GVC"], description="Covariates lagged by W in SDM")
    draws: int = Field(default=1000, ge=100)
    permutations: int = Field(default=0, ge=0, description="0 disables permutation inference")
    growth: Literal["total", "mean"] = "total"
    lags: Union[int, Literal["auto"]] = "auto"
    trend: Literal["n", "c", "ct"] = "c"
    unitroot_log: bool = True
    lee_yu: bool = False
    numerical_hessian: bool = False
    seed: int = Field(default=0, ge=0)
    out: Path = Path("gvcspatial-out")
    formats: List[Format] = Field(default_factory=lambda: ["text"])

    @field_validator("models", "spatial_lag", "formats", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("covariates", mode="before")
    @classmethod
    def _split_blocks(cls, value: Any) -> Any:
        # custom:Y,EI keeps its commas
        return _split(value, r"\s+")

    @field_validator("flow_period", "years", mode="before")
    @classmethod
    def _parse_years(cls, value: Any) -> Any:
        return _year_range(value)

    @field_validator("columns", mode="before")
    @classmethod
    def _parse_columns(cls, value: Any) -> Any:
        return parse_columns(value)

    @field_validator("models")
    @classmethod
    def _known_models(cls, value: List[str]) -> List[str]:
        kinds = [ModelKind.parse(item).value for item in value]
        if not kinds:
            raise ValueError("at least one model is needed")
        return list(dict.fromkeys(kinds))

    @field_validator("covariates")
    @classmethod
    def _known_blocks(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one covariate block is needed")
        for item in value:
            _block(item)
        return value

    @field_validator("permutations")
    @classmethod
    def _enough_permutations(cls, value: int) -> int:
        if 0 < value < 99:
            raise ValueError(f"permutation inference needs at least 99 replications, got {value}")
        return value

    @model_validator(mode="after")
    def _inputs(self) -> "RunConfig":
        if self.flows is not None and self.weights is not None:
            raise ValueError("give either flows or weights, not both")
        for name in ("panel", "flows", "weights"):
            path = getattr(self, name)
            if path is not None and not path.is_file():
                raise ValueError(f"{name} file not found: {path}")
        return self

    def blocks(self) -> List[Tuple[str, Tuple[str, ...]]]:
        """(label, covariates) per requested block."""
        return [(item, _block(item)) for item in self.covariates]

    @property
    def model_kinds(self) -> List[ModelKind]:
        return [ModelKind(kind) for kind in self.models]

    @property
    def needs_weights(self) -> bool:
        return any(kind.spatial for kind in self.model_kinds)

    def require_panel(self) -> Path:
        if self.panel is None:
            raise UsageError("no panel file: pass --panel")
        return self.panel

    def require_weight_source(self) -> Path:
        source = self.flows or self.weights
        if source is None:
            raise UsageError("no weight source: pass --flows or --weights")
        return source

    def estimation_options(self) -> EstimationOptions:
        return EstimationOptions(lee_yu=self.lee_yu, numerical_hessian=self.numerical_hessian)


def _block(item: str) -> Tuple[str, ...]:
    if item in COVARIATE_BLOCKS:
        return COVARIATE_BLOCKS[item]
    if item.startswith("custom:"):
        names = [name.strip() for name in item[len("custom:"):].split(",") if name.strip()]
        if not names:
            raise UsageError(f"empty custom covariate list: {item!r}")
        return resolve_covariates(names)
    raise UsageError(f"Unknown covariate block: {item}; use block1..block4 or custom:NAME,NAME")


def _read_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    values: Dict[str, Any] = {}
    for key, value in dotenv_values(path).items():
        if value is None or value.strip() == "":
            continue
        key = key.strip()
        if key in PATH_KEYS:
            candidate = Path(value.strip())
            value = str(candidate if candidate.is_absolute() else path.parent / candidate)
        values[key] = value
    return values


def _validated(model: Any, values: Dict[str, Any], source: str) -> Any:
    try:
        return model.model_validate(values)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}" for error in exc.errors()
        )
        raise UsageError(f"invalid {source}: {problems}") from None


def load_run_config(
    path: Union[str, Path, None] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """RunConfig from an optional key-value file plus non-None overrides."""
    values = _read_file(path) if path is not None else {}
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return _validated(RunConfig, values, f"run config {path}" if path else "run options")


class CampaignConfig(BaseModel):
    """A Monte Carlo campaign: the data-generating process plus run settings."""

    model_config = ConfigDict(frozen=True)

    sim: SimConfig
    reps: int = Field(default=200)
    estimators: List[str] = Field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    workers: int = Field(default=1, ge=1)
    out: Path = Path("gvcspatial-out")
    formats: List[Format] = Field(default_factory=lambda: ["text"])

    @field_validator("estimators", "formats", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        return _split(value)


CAMPAIGN_KEYS = ("reps", "estimators", "workers", "out", "formats")
SIM_LIST_KEYS = ("beta", "gamma", "lagged")


def bundled_campaign() -> Path:
    """Path of the default campaign file shipped with the package."""
    return Path(str(resources.files("gvcspatial.resources").joinpath("campaign.env")))


def load_campaign(
    path: Union[str, Path, None] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> CampaignConfig:
    """Campaign from a key-value file, the bundled default when ``path`` is None."""
    source = Path(path) if path is not None else bundled_campaign()
    values = _read_file(source)
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    run = {key: values.pop(key) for key in CAMPAIGN_KEYS if key in values}
    for key in SIM_LIST_KEYS:
        if isinstance(values.get(key), str):
            values[key] = _split(values[key])
    return _validated(CampaignConfig, {**run, "sim": values}, f"campaign config {source}")


def derive_seed(seed: int, stage: str, *keys: str) -> int:
    """Per-stage seed from the run seed.

    The entropy is [seed, crc32(stage), crc32(key), ...] fed to
    numpy's SeedSequence; the first 32-bit word of its state is the
    derived seed. Stages: ``autocorr`` keyed by statistic, ``effects``
    keyed by block and model.
    """
    entropy = [int(seed)] + [zlib.crc32(part.encode("utf-8")) for part in (stage,) + keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
