"""Per-run configuration: global options plus one parameter record per CLI verb."""
import hashlib
import json
import tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from app.config import format_validation_error
from app.ensemble import EnsembleConfig, default_grid
from app.exceptions import ConfigError, DimensionMismatchError
from app.lattice import Torus
from app.logger import logger
from app.potentials import (
    DistributionSpec,
    PotentialField,
    constant_potential,
    periodic_potential,
    require_theorem_conformant,
    sample_anderson,
)


class Verbosity(str, Enum):
    QUIET = "quiet"
    NORMAL = "normal"
    VERBOSE = "verbose"


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialSource(_Record):
    """Exactly one of: a flat-format file, an Anderson draw, a periodic cell, a constant."""

    file: Optional[Path] = None
    d: Optional[int] = Field(None, ge=1)
    K: Optional[int] = Field(None, ge=3)
    distribution: Optional[DistributionSpec] = None
    seed: int = Field(0, ge=0, lt=2**64)
    realization: int = Field(0, ge=0)
    cell: Optional[List[Any]] = Field(None, description="Fundamental cell, nested lists for d > 1")
    constant: Optional[float] = Field(None, ge=0)
    allow_constant: bool = False

    @model_validator(mode="after")
    def _one_source(self) -> "PotentialSource":
        given = [name for name in ("file", "distribution", "cell", "constant") if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError(f"give exactly one of file, distribution, cell, constant (got {given or 'none'})")
        if self.file is None and (self.d is None or self.K is None):
            raise ValueError("d and K are required unless the potential comes from a file")
        return self

    @property
    def seeds(self) -> Optional[str]:
        return f"{self.seed}:{self.realization}" if self.distribution is not None else None

    def build(self) -> PotentialField:
        if self.file is not None:
            V = PotentialField.read(self.file)
            if self.d is not None and V.torus.d != self.d or self.K is not None and V.torus.K != self.K:
                raise DimensionMismatchError(f"{self.file} holds d={V.torus.d}, K={V.torus.K}")
            return V
        t = Torus(d=self.d, K=self.K)
        if self.distribution is not None:
            require_theorem_conformant(self.distribution, self.allow_constant)
            return sample_anderson(t, self.distribution, self.seed, self.realization)
        if self.cell is not None:
            return periodic_potential(t, np.array(self.cell, dtype=float))
        return constant_potential(t, self.constant)


class GridSpec(_Record):
    """A μ grid: explicit values, or `points` log-spaced values between mu_min and mu_max."""

    points: int = Field(200, ge=2)
    mu_min: Optional[float] = Field(None, gt=0)
    mu_max: Optional[float] = Field(None, gt=0)
    values: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "GridSpec":
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("grid values must be sorted")
        if self.mu_min is not None and self.mu_max is not None and self.mu_min >= self.mu_max:
            raise ValueError("mu_min must be below mu_max")
        return self

    def resolve(self, t: Torus, spectral_top: float) -> np.ndarray:
        if self.values:
            return np.asarray(self.values, dtype=float)
        if self.mu_min is None and self.mu_max is None:
            return default_grid(t, spectral_top, self.points)
        top = self.mu_max or spectral_top
        bottom = self.mu_min or 1e-3 * top
        return np.logspace(np.log10(bottom), np.log10(top), self.points)


CountMethod = Literal["auto", "dense", "inertia"]


class SolveParams(_Record):
    potential: PotentialSource
    method: Literal["auto", "direct", "cg"] = "auto"


class IdsParams(_Record):
    potential: PotentialSource
    grid: GridSpec = Field(default_factory=GridSpec)
    strict: bool = False
    method: CountMethod = "auto"


class BoxcountParams(_Record):
    potential: Optional[PotentialSource] = None
    landscape: Optional[Path] = Field(None, description="Landscape field file written by `solve`")
    grid: GridSpec = Field(default_factory=GridSpec)
    shift: int = 0

    @model_validator(mode="after")
    def _one_input(self) -> "BoxcountParams":
        if (self.potential is None) == (self.landscape is None):
            raise ValueError("give either a potential or a landscape file")
        return self


class CompareParams(_Record):
    """Either a potential (both curves computed) or an N curve CSV together with a landscape file."""

    potential: Optional[PotentialSource] = None
    n_curve: Optional[Path] = None
    landscape: Optional[Path] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    fit: bool = True
    method: CountMethod = "auto"

    @model_validator(mode="after")
    def _inputs(self) -> "CompareParams":
        if self.potential is None and (self.n_curve is None or self.landscape is None):
            raise ValueError("give a potential, or both n_curve and landscape")
        if self.potential is not None and (self.n_curve is not None or self.landscape is not None):
            raise ValueError("a potential excludes n_curve and landscape")
        return self


class DualParams(_Record):
    potential: PotentialSource
    grid: GridSpec = Field(default_factory=GridSpec)
    method: CountMethod = "auto"


class EnsembleParams(EnsembleConfig):
    window: Optional[Tuple[float, float]] = Field(None, description="Tail-fit window (μ_lo, μ_hi)")
    mu0: Optional[float] = Field(None, gt=0, description="Upper end of the tail window when `window` is unset")

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(**self.model_dump(exclude={"window", "mu0"}))


class VerifyParams(_Record):
    seed: int = Field(1, ge=0, lt=2**64)
    trials: int = Field(500, ge=1)
    mc_trials: int = Field(100_000, ge=100)
    moser_trials: int = Field(20, ge=1)
    moser_scales: List[int] = Field(default_factory=lambda: [3, 6, 9])
    baseline: Optional[Path] = Field(None, description="Regression baseline JSON; defaults to the output directory")


class Figure4Params(_Record):
    """Canned reproduction: d=1, K=300, v uniform on [0,10]."""

    seed: int = Field(0, ge=0, lt=2**64)
    seeds: int = Field(1, ge=1, description="Number of realizations averaged, streams (seed, 0..seeds-1)")
    points: int = Field(200, ge=2)
    d: Literal[1] = 1
    K: int = Field(300, ge=3)
    high: float = Field(10.0, gt=0)


VERB_PARAMS: Dict[str, type] = {
    "solve": SolveParams,
    "ids": IdsParams,
    "boxcount": BoxcountParams,
    "compare": CompareParams,
    "dual": DualParams,
    "ensemble": EnsembleParams,
    "verify": VerifyParams,
    "figure4": Figure4Params,
}


class RunConfig(_Record):
    output_dir: Optional[Path] = None
    workers: Optional[int] = Field(None, ge=1)
    verbosity: Verbosity = Verbosity.NORMAL
    plot: bool = Field(True, description="Render a matplotlib script next to each curve CSV")

    solve: Optional[SolveParams] = None
    ids: Optional[IdsParams] = None
    boxcount: Optional[BoxcountParams] = None
    compare: Optional[CompareParams] = None
    dual: Optional[DualParams] = None
    ensemble: Optional[EnsembleParams] = None
    verify: Optional[VerifyParams] = None
    figure4: Optional[Figure4Params] = None

    _command: str = PrivateAttr(default="")

    @property
    def command(self) -> str:
        return self._command

    def with_command(self, command: str) -> "RunConfig":
        self._command = command
        return self

    def params(self, verb: str) -> BaseModel:
        """The verb's parameter record; verbs whose fields all have defaults may omit it."""
        record = getattr(self, verb, None)
        if record is not None:
            return record
        try:
            return VERB_PARAMS[verb]()
        except ValidationError as e:
            raise ConfigError(f"missing [{verb}] section:\n{format_validation_error(e, prefix=verb)}") from e

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_run_file(path: Path) -> Dict[str, Any]:
    """YAML (JSON is a subset) or TOML by suffix."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"run config {path} does not exist")
    try:
        if path.suffix == ".toml":
            with path.open("rb") as f:
                data = tomllib.load(f)
        elif path.suffix in (".yaml", ".yml", ".json"):
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        else:
            raise ConfigError(f"unsupported run config format {path.suffix!r} (use .yaml, .json or .toml)")
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Nested merge; override values win, mappings merge key by key."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_overrides(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    data = load_run_file(path) if path else {}
    data = merge_overrides(data, overrides or {})
    try:
        run = RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e
    logger.debug(f"run config {run.config_hash()[:12]} loaded from {path or 'flags'}")
    return run
