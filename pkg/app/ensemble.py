"""
Monte Carlo estimates of EN(μ), EN_u(μ) and the dual curve over Anderson
ensembles.

Realization i draws its potential from the Philox stream keyed by
(master_seed, i). Workers may finish in any order; the reduction runs after
all of them in realization-index order, so means are bit-identical for any
worker count.
"""
from concurrent.futures import ThreadPoolExecutor
from functools import reduce
from typing import Dict, List, Literal, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator
from tqdm import tqdm

from app.boxcount import box_counting, dual_nu_curve, lifschitz_fit, nu_curve, s_of_mu
from app.config import config
from app.exceptions import LandscapeError, ParityError, RealizationError, ScaleError, WindowError
from app.landscape import solve_landscape
from app.lattice import Torus
from app.logger import logger
from app.operator import assemble
from app.potentials import DistributionSpec, require_theorem_conformant, sample_anderson
from app.spectrum import CountingCurve, ids_curve


CurveName = Literal["N", "N_u", "Nu_dual"]


class EnsembleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d: int = Field(..., ge=1)
    K: int = Field(..., ge=3)
    distribution: DistributionSpec
    realizations: int = Field(..., ge=1)
    master_seed: int = Field(..., ge=0, lt=2**64)
    grid: List[float] = Field(default_factory=list, description="Sorted μ grid; empty means the default grid")
    outputs: Set[CurveName] = Field(default_factory=lambda: {"N", "N_u"})
    allow_constant: bool = False
    k_star: float = Field(1.0, gt=0, description="Lower tail-window constant, window starts at K_*/K^2")

    @model_validator(mode="after")
    def _check_grid(self) -> "EnsembleConfig":
        if any(b < a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be sorted")
        return self

    @field_serializer("outputs")
    def _sorted_outputs(self, outputs: Set[str]) -> List[str]:
        return sorted(outputs)

    @property
    def torus(self) -> Torus:
        return Torus(d=self.d, K=self.K)

    @property
    def spectral_top(self) -> float:
        return 4.0 * self.d + self.distribution.essential_sup

    def mu_grid(self) -> np.ndarray:
        if self.grid:
            return np.asarray(self.grid, dtype=float)
        return default_grid(self.torus, self.spectral_top)


def default_grid(t: Torus, spectral_top: float, points: int = 200) -> np.ndarray:
    """Log-spaced grid on [1e-3·top, top], clipped to the box-counting floor μ >= 1/K²."""
    grid = np.logspace(np.log10(1e-3 * spectral_top), np.log10(spectral_top), points)
    floor = 1.0 / t.K**2
    if grid[0] < floor:
        logger.warning(f"default μ grid clipped to the scale floor {floor:.3g} on K={t.K}")
        grid = np.logspace(np.log10(floor), np.log10(spectral_top), points)
    return grid


class Realization(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    curves: Dict[str, np.ndarray]
    upper_violations: int = 0


class EnsembleResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: EnsembleConfig
    grid: np.ndarray
    means: Dict[str, np.ndarray]
    standard_errors: Dict[str, np.ndarray]
    upper_violations: int = 0
    realizations: List[Realization] = Field(default_factory=list)

    def curve(self, name: str) -> CountingCurve:
        return CountingCurve(
            grid=self.grid,
            values=self.means[name],
            kind=f"mean_{name}",
            metadata={"d": self.config.d, "K": self.config.K, "seeds": self.seeds()},
        )

    def seeds(self) -> Tuple[int, int]:
        """(master seed, realization count); realization i uses stream (seed, i)."""
        return self.config.master_seed, self.config.realizations

    def to_csv(self, digits: Optional[int] = None) -> str:
        digits = digits or config.output.significant_digits
        names = [name for name in ("N", "N_u", "Nu_dual") if name in self.means]
        columns = ["mu"]
        for name in names:
            label = "Nu" if name == "N_u" else name
            columns += [f"mean_{label}", f"se_{label}"]
        rows = [",".join(columns)]
        for i, mu in enumerate(self.grid):
            cells = [mu]
            for name in names:
                cells += [self.means[name][i], self.standard_errors[name][i]]
            rows.append(",".join(f"{x:.{digits}g}" for x in cells))
        return "\n".join(rows) + "\n"

    def metadata(self) -> dict:
        return {
            "config": self.config.model_dump(mode="json"),
            "master_seed": self.config.master_seed,
            "realizations": self.config.realizations,
            "seed_streams": "philox(master_seed, realization index)",
            "common_random_numbers": True,
            "upper_law_violations": self.upper_violations,
        }


def run_realization(cfg: EnsembleConfig, index: int, grid: np.ndarray) -> Realization:
    t = cfg.torus
    try:
        V = sample_anderson(t, cfg.distribution, cfg.master_seed, index)
        H = assemble(t, V)
        curves = {}
        violations = 0
        if "N" in cfg.outputs:
            curves["N"] = ids_curve(H, grid).values
        if {"N_u", "Nu_dual"} & cfg.outputs:
            L = solve_landscape(H, allow_constant=cfg.allow_constant)
            if "N_u" in cfg.outputs:
                curves["N_u"] = nu_curve(L, grid).values
            if "N" in cfg.outputs and "N_u" in cfg.outputs:
                upper = np.array([box_counting(L, 4 * t.d * mu) for mu in grid])
                violations = int(np.count_nonzero(curves["N"] > upper))
            if "Nu_dual" in cfg.outputs:
                L_dual = solve_landscape(H.dual(), allow_constant=cfg.allow_constant)
                curves["Nu_dual"] = dual_nu_curve(L_dual, grid, H.spectral_top).values
        return Realization(index=index, curves=curves, upper_violations=violations)
    except LandscapeError as e:
        raise RealizationError(
            f"realization {index} (seed {cfg.master_seed}) failed: {e.message}",
            index=index,
            seed=cfg.master_seed,
        ) from e


def run_ensemble(
    cfg: EnsembleConfig,
    workers: Optional[int] = None,
    keep_realizations: bool = False,
    progress: bool = False,
) -> EnsembleResult:
    """Mean curves and per-point standard errors over R seeded realizations."""
    require_theorem_conformant(cfg.distribution, cfg.allow_constant)
    grid = cfg.mu_grid()
    if {"N_u", "Nu_dual"} & cfg.outputs and s_of_mu(grid[0]) > cfg.K:
        raise ScaleError(f"grid starts at μ={grid[0]!r}, below the scale floor of K={cfg.K}", min_mu=1.0 / cfg.K**2)
    if "Nu_dual" in cfg.outputs and cfg.K % 2:
        raise ParityError(f"dual curves need an even K, got K={cfg.K}")

    workers = workers or config.ensemble.workers
    R = cfg.realizations
    logger.info(f"running {R} realizations on d={cfg.d}, K={cfg.K} with {workers} worker(s)")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(
            tqdm(
                executor.map(lambda i: run_realization(cfg, i, grid), range(R)),
                total=R,
                desc="realizations",
                disable=not progress,
            )
        )

    means, ses = {}, {}
    for name in results[0].curves:
        rows = [r.curves[name] for r in results]
        total = reduce(np.add, rows)
        mean = total / R
        means[name] = mean
        if R > 1:
            spread = reduce(np.add, [(row - mean) ** 2 for row in rows])
            ses[name] = np.sqrt(spread / (R - 1)) / np.sqrt(R)
        else:
            ses[name] = np.zeros_like(mean)

    violations = sum(r.upper_violations for r in results)
    if violations:
        logger.error(f"upper landscape law violated at {violations} (realization, μ) pairs")
    return EnsembleResult(
        config=cfg,
        grid=grid,
        means=means,
        standard_errors=ses,
        upper_violations=violations,
        realizations=results if keep_realizations else [],
    )


def tail_window(cfg: EnsembleConfig, mu0_guess: float) -> Tuple[float, float]:
    """(K_*/K², μ₀) intersected with the grid and with s(μ) <= K."""
    grid = cfg.mu_grid()
    lo = max(cfg.k_star / cfg.K**2, 1.0 / cfg.K**2, float(grid[0]))
    hi = min(float(mu0_guess), float(grid[-1]))
    if lo >= hi:
        raise WindowError(f"tail window [{lo:.3g}, {hi:.3g}] is empty")
    return lo, hi


class TailFit(BaseModel):
    slope: float
    window: Tuple[float, float]
    excluded: List[float] = Field(default_factory=list, description="μ dropped because EN is 0 or 1")


def _log_width(points: np.ndarray) -> float:
    return float(np.log(points.max() / points.min())) if len(points) else 0.0


def tail_fit(result: EnsembleResult, window: Tuple[float, float]) -> TailFit:
    """
    Lifschitz slope of the mean N curve, skipping points outside the log(−log) domain.

    Refuses the fit when the surviving points are too few or span too little
    of the window, e.g. when EN is still 0 over most of it.
    """
    curve = result.curve("N")
    inside = (curve.grid >= window[0]) & (curve.grid <= window[1])
    usable = inside & (curve.values > 0) & (curve.values < 1)
    excluded = [float(mu) for mu in curve.grid[inside & ~usable]]
    if excluded:
        logger.warning(f"{len(excluded)} window points excluded from the tail fit (EN outside (0, 1))")

    settings = config.ensemble
    kept = curve.grid[usable]
    if len(kept) < settings.tail_min_points:
        raise WindowError(
            f"only {len(kept)} of {int(np.count_nonzero(inside))} points in [{window[0]:.3g}, {window[1]:.3g}] "
            f"have EN in (0, 1); the fit needs {settings.tail_min_points}"
        )
    coverage = _log_width(kept) / _log_width(curve.grid[inside])
    if coverage < settings.tail_min_coverage:
        raise WindowError(
            f"usable points span [{kept.min():.3g}, {kept.max():.3g}], {coverage:.0%} of the window's log-width"
        )
    trimmed = CountingCurve(grid=curve.grid[usable], values=curve.values[usable], kind=curve.kind)
    slope = lifschitz_fit(trimmed, result.config.d, window)
    return TailFit(slope=slope, window=window, excluded=excluded)
