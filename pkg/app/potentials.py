"""
Potential fields: explicit arrays, Z^d-periodic tilings and Anderson-type
i.i.d. draws from a declared distribution.
"""
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.exceptions import (
    DimensionMismatchError,
    IncompatiblePeriodError,
    InvalidPotentialError,
    ParameterRangeError,
)
from app.lattice import ScalarField, Torus


class UniformDistribution(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["uniform"] = "uniform"
    low: float = 0.0
    high: float = 1.0

    @model_validator(mode="after")
    def _check(self) -> "UniformDistribution":
        if self.low < 0:
            raise ValueError("support must lie in [0, inf)")
        if self.high <= self.low:
            raise ValueError("high must exceed low")
        return self

    @property
    def essential_inf(self) -> float:
        return self.low

    @property
    def essential_sup(self) -> float:
        return self.high

    def cdf(self, delta: float) -> float:
        return float(np.clip((delta - self.low) / (self.high - self.low), 0.0, 1.0))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size)


class BernoulliDistribution(BaseModel):
    """Value `height` with probability p, else 0."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["bernoulli"] = "bernoulli"
    p: float = 0.5
    height: float = 1.0

    @model_validator(mode="after")
    def _check(self) -> "BernoulliDistribution":
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.height < 0:
            raise ValueError("support must lie in [0, inf)")
        return self

    @property
    def essential_inf(self) -> float:
        return self.height if self.p == 1.0 else 0.0

    @property
    def essential_sup(self) -> float:
        return self.height if self.p > 0.0 else 0.0

    def cdf(self, delta: float) -> float:
        if delta < 0:
            return 0.0
        if delta < self.height:
            return 1.0 - self.p
        return 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.where(rng.random(size) < self.p, self.height, 0.0)


class DiscreteDistribution(BaseModel):
    """Finitely many atoms given as (value, probability) pairs."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["discrete"] = "discrete"
    atoms: Tuple[Tuple[float, float], ...]

    @model_validator(mode="after")
    def _check(self) -> "DiscreteDistribution":
        if not self.atoms:
            raise ValueError("at least one atom is required")
        values = [v for v, _ in self.atoms]
        probs = [p for _, p in self.atoms]
        if min(values) < 0:
            raise ValueError("support must lie in [0, inf)")
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        return self

    def _support(self) -> List[float]:
        return [v for v, p in self.atoms if p > 0]

    @property
    def essential_inf(self) -> float:
        return min(self._support())

    @property
    def essential_sup(self) -> float:
        return max(self._support())

    def cdf(self, delta: float) -> float:
        return float(min(1.0, sum(p for v, p in self.atoms if v <= delta)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        values = np.array([v for v, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        return values[rng.choice(len(values), size=size, p=probs / probs.sum())]


DistributionSpec = Annotated[
    Union[UniformDistribution, BernoulliDistribution, DiscreteDistribution],
    Field(discriminator="kind"),
]


def is_degenerate(dist: DistributionSpec) -> bool:
    return dist.essential_inf == dist.essential_sup


def require_theorem_conformant(dist: DistributionSpec, allow_constant: bool = False) -> None:
    """Refuse ensembles outside inf supp = 0 < sup supp (no automatic shifting)."""
    if is_degenerate(dist):
        if allow_constant:
            return
        raise InvalidPotentialError(f"{dist.kind} distribution is a point mass; pass allow_constant to use it")
    if dist.essential_inf != 0.0:
        raise InvalidPotentialError(
            f"inf supp P0 must be 0 for the Anderson theorems, got {dist.essential_inf}"
        )


def cdf_eval(dist: DistributionSpec, delta: float) -> float:
    """F(δ) = P0(v_n <= δ)."""
    if delta < 0:
        return 0.0
    return dist.cdf(delta)


class PotentialField(BaseModel):
    """Nonnegative potential values on a torus."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    torus: Torus
    values: np.ndarray
    reference_vmax: float = Field(..., description="V_max used by dual constructions")
    source: str = "explicit"
    seed: Optional[int] = None

    @field_validator("values", mode="before")
    @classmethod
    def _copy_values(cls, v):
        return np.array(v, dtype=float)

    @model_validator(mode="after")
    def _check_values(self) -> "PotentialField":
        if self.values.shape != self.torus.shape:
            raise DimensionMismatchError(
                f"potential has shape {self.values.shape}, torus needs {self.torus.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidPotentialError("potential values must be finite")
        if np.min(self.values) < 0:
            raise InvalidPotentialError(f"potential values must be nonnegative, min is {np.min(self.values)}")
        if self.reference_vmax < np.max(self.values):
            raise InvalidPotentialError("reference V_max is below the realization maximum")
        self.values.setflags(write=False)
        return self

    @property
    def vmax(self) -> float:
        """Realization maximum max_n v_n."""
        return float(np.max(self.values))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values.flat[0]))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def describe(self) -> str:
        seed = f", seed={self.seed}" if self.seed is not None else ""
        return f"{self.source}(d={self.torus.d}, K={self.torus.K}{seed})"

    def to_text(self, digits: int = 17) -> str:
        flat = " ".join(f"{x:.{digits}g}" for x in self.values.ravel())
        return f"{self.torus.d} {self.torus.K}\n{flat}\n"

    @classmethod
    def from_text(cls, text: str) -> "PotentialField":
        return explicit_potential_from_tokens(text.split())

    def write(self, path: Path, header: str = "") -> None:
        Path(path).write_text(header + self.to_text(), encoding="utf-8")

    @classmethod
    def read(cls, path: Path) -> "PotentialField":
        return cls.from_text(_strip_comments(Path(path).read_text(encoding="utf-8")))


def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))


def read_flat_field(path: Path) -> Tuple[Torus, np.ndarray]:
    """Parse the flat text format `d K` + K^d values."""
    tokens = _strip_comments(Path(path).read_text(encoding="utf-8")).split()
    return _parse_tokens(tokens)


def _parse_tokens(tokens: Sequence[str]) -> Tuple[Torus, np.ndarray]:
    if len(tokens) < 2:
        raise InvalidPotentialError("flat field needs a `d K` header")
    torus = Torus(d=int(tokens[0]), K=int(tokens[1]))
    values = np.array([float(x) for x in tokens[2:]])
    return torus, torus.field(values)


def explicit_potential_from_tokens(tokens: Sequence[str]) -> PotentialField:
    torus, values = _parse_tokens(tokens)
    return explicit_potential(torus, values)


def explicit_potential(t: Torus, values, reference_vmax: Optional[float] = None) -> PotentialField:
    arr = np.array(t.field(values), dtype=float)
    vmax = float(np.max(arr)) if reference_vmax is None else float(reference_vmax)
    return PotentialField(torus=t, values=arr, reference_vmax=vmax, source="explicit")


def constant_potential(t: Torus, c: float) -> PotentialField:
    return explicit_potential(t, np.full(t.shape, float(c)))


def periodic_potential(t: Torus, cell) -> PotentialField:
    """Tile the fundamental cell ⟦1,p_1⟧×…×⟦1,p_d⟧ across the torus."""
    cell = np.asarray(cell, dtype=float)
    if cell.ndim != t.d:
        if t.d == 1:
            cell = cell.ravel()
        else:
            raise DimensionMismatchError(f"cell has {cell.ndim} axes, torus has d={t.d}")
    for p in cell.shape:
        if t.K % p != 0:
            raise IncompatiblePeriodError(f"period {p} does not divide K={t.K}")
    if np.min(cell) < 0:
        raise InvalidPotentialError("cell values must be nonnegative")
    reps = tuple(t.K // p for p in cell.shape)
    values = np.tile(cell, reps)
    return PotentialField(
        torus=t,
        values=values,
        reference_vmax=float(np.max(values)),
        source=f"periodic{tuple(cell.shape)}",
    )


def site_stream(seed: int, realization: int = 0) -> np.random.Generator:
    """Counter-based Philox stream keyed by (master seed, realization index)."""
    if not 0 <= seed < 2**64:
        raise ParameterRangeError(f"seed must be a 64-bit unsigned integer, got {seed}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(realization,))
    return np.random.Generator(np.random.Philox(sequence))


def sample_anderson(t: Torus, dist: DistributionSpec, seed: int, realization: int = 0) -> PotentialField:
    """One i.i.d. realization, filled in canonical site order."""
    rng = site_stream(seed, realization)
    values = dist.sample(rng, t.volume).reshape(t.shape)
    return PotentialField(
        torus=t,
        values=values,
        reference_vmax=max(dist.essential_sup, float(np.max(values))),
        source=f"anderson[{dist.kind}]",
        seed=seed,
    )


def dual_potential(V: PotentialField) -> PotentialField:
    """V_max − V, with V_max the reference (ensemble) maximum."""
    values = V.reference_vmax - V.values
    # 浮動小数点の丸めで負にならないようにする
    values = np.where(values < 0, 0.0, values)
    return PotentialField(
        torus=V.torus,
        values=values,
        reference_vmax=V.reference_vmax,
        source=f"dual[{V.source}]",
        seed=V.seed,
    )
