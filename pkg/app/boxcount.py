"""
Landscape box counting N_u(μ), the two-sided landscape law checks, the
practical fit N(μ) ≈ c₁N_u(c₂μ) and Lifschitz-tail slopes.
"""
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import linprog

from app.config import config
from app.exceptions import FitError, ParameterRangeError, ScaleError, WindowError
from app.landscape import LandscapeField
from app.lattice import partition
from app.logger import logger
from app.spectrum import CountingCurve


BoxModel = Callable[[np.ndarray], np.ndarray]


def s_of_mu(mu: float) -> int:
    """s(μ) = ⌈μ^{-1/2}⌉ with integers snapped within 1e-9."""
    if not mu > 0:
        raise ParameterRangeError(f"s(μ) needs μ > 0, got {mu}")
    x = mu**-0.5
    nearest = round(x)
    if abs(x - nearest) <= 1e-9:
        return max(1, int(nearest))
    return max(1, math.ceil(x))


def qualifying_boxes(L: LandscapeField, mu: float, side: int, shift=0) -> int:
    """Number of boxes of P(side) + shift on which min 1/u ≤ μ."""
    minima = partition(L.torus, side, shift).box_minima(L.effective)
    return int(np.count_nonzero(minima <= mu))


def box_counting(L: LandscapeField, mu: float, shift=0) -> float:
    """N_u(μ) = K^{-d}·#{Q ∈ P(s(μ)) : min_Q 1/u ≤ μ}."""
    s = s_of_mu(mu)
    K = L.torus.K
    if s > K:
        min_mu = 1.0 / K**2
        raise ScaleError(f"s({mu!r}) = {s} exceeds K={K}; smallest admissible μ is {min_mu!r}", min_mu=min_mu)
    return qualifying_boxes(L, mu, s, shift) / L.torus.volume


def nu_curve(L: LandscapeField, grid: Sequence[float], shift=0) -> CountingCurve:
    arr = np.asarray(grid, dtype=float)
    values = np.array([box_counting(L, mu, shift) for mu in arr])
    curve = CountingCurve(
        grid=arr,
        values=values,
        kind="N_u",
        metadata={"d": L.torus.d, "K": L.torus.K, "shift": shift},
    )
    if not curve.is_monotone():
        logger.warning(f"N_u curve on d={L.torus.d}, K={L.torus.K} is not monotone in μ")
    return curve


def dual_nu_curve(L_dual: LandscapeField, grid: Sequence[float], spectral_top: float) -> CountingCurve:
    """1 − N_ũ(4d+V_max−μ) on the μ grid; NaN where μ̃ is below the scale floor."""
    arr = np.asarray(grid, dtype=float)
    values = []
    for mu in arr:
        mu_dual = spectral_top - mu
        if mu_dual <= 0:
            values.append(1.0)
            continue
        try:
            values.append(1.0 - box_counting(L_dual, mu_dual))
        except ScaleError:
            values.append(float("nan"))
    return CountingCurve(
        grid=arr,
        values=values,
        kind="Nu_dual",
        metadata={"d": L_dual.torus.d, "K": L_dual.torus.K, "spectral_top": spectral_top},
    )


class LawReport(BaseModel):
    """Per-μ evaluation of one landscape law inequality lhs ≤ rhs (or ≥)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    grid: List[float] = Field(default_factory=list)
    lhs: List[float] = Field(default_factory=list)
    rhs: List[float] = Field(default_factory=list)
    margins: List[float] = Field(default_factory=list)
    violations: List[Tuple[float, float, float]] = Field(default_factory=list)
    skipped: List[float] = Field(default_factory=list, description="μ dropped by the scale floor")
    n_curve: Optional[CountingCurve] = None
    nu_curve: Optional[CountingCurve] = None
    fitted: Optional[Tuple[float, float, float]] = None

    @property
    def holds(self) -> bool:
        return not self.violations

    def record(self, mu: float, lhs: float, rhs: float, margin: float) -> None:
        self.grid.append(float(mu))
        self.lhs.append(float(lhs))
        self.rhs.append(float(rhs))
        self.margins.append(float(margin))
        if margin < 0:
            self.violations.append((float(mu), float(lhs), float(rhs)))

    def summary(self) -> str:
        status = "holds" if self.holds else f"{len(self.violations)} violation(s)"
        line = f"{self.name}: {status} on {len(self.grid)} grid points"
        if self.skipped:
            line += f", {len(self.skipped)} skipped below the scale floor"
        if self.margins:
            line += f", min margin {min(self.margins):.6g}"
        return line

    def to_csv(self, digits: Optional[int] = None) -> str:
        digits = digits or config.output.significant_digits
        rows = ["mu,lhs,rhs,margin"]
        for row in zip(self.grid, self.lhs, self.rhs, self.margins):
            rows.append(",".join(f"{x:.{digits}g}" for x in row))
        return "\n".join(rows) + "\n" + f"# {self.summary()}\n"

    def write(self, path: Path, header: str = "") -> None:
        Path(path).write_text(header + self.to_csv(), encoding="utf-8")


def upper_bound_check(n: CountingCurve, L: LandscapeField) -> LawReport:
    """N(μ) ≤ N_u(4dμ) at every grid point, with a fresh box count at 4dμ."""
    c1 = 4 * L.torus.d
    report = LawReport(name="upper law N(mu) <= N_u(4d mu)", n_curve=n)
    for mu, value in zip(n.grid, n.values):
        if mu <= 0:
            # N vanishes below the spectrum
            report.record(mu, value, 0.0, -value)
            continue
        try:
            rhs = box_counting(L, c1 * mu)
        except ScaleError:
            report.skipped.append(float(mu))
            continue
        report.record(mu, value, rhs, rhs - value)
    if report.skipped:
        logger.warning(f"upper law check skipped {len(report.skipped)} μ below the scale floor")
    return report


def lower_bound_check(
    n: CountingCurve,
    L: LandscapeField,
    alpha: float,
    c0: float,
    C0: float,
    c1: float,
) -> LawReport:
    """N(μ) ≥ c₀α^d N_u(c₁α^{d+2}μ) − C₀N_u(c₁α^{d+4}μ) with trial constants."""
    if not 0 < alpha < 1:
        raise ParameterRangeError(f"α must lie in (0, 1), got {alpha}")
    if c1 <= 0 or c0 < 0 or C0 < 0:
        raise ParameterRangeError("trial constants need c₁ > 0 and c₀, C₀ >= 0")
    d = L.torus.d
    report = LawReport(name=f"lower law alpha={alpha} c0={c0} C0={C0} c1={c1}", n_curve=n)
    for mu, value in zip(n.grid, n.values):
        try:
            gain = c0 * alpha**d * box_counting(L, c1 * alpha ** (d + 2) * mu) if c0 else 0.0
            loss = C0 * box_counting(L, c1 * alpha ** (d + 4) * mu) if C0 else 0.0
        except (ScaleError, ParameterRangeError):
            report.skipped.append(float(mu))
            continue
        rhs = gain - loss
        report.record(mu, value, rhs, value - rhs)
    if report.skipped:
        logger.warning(f"lower law grid truncated: {len(report.skipped)} μ below the scale floor")
    return report


def dual_bound_check(n: CountingCurve, L_dual: LandscapeField, spectral_top: float) -> LawReport:
    """N(μ) ≥ 1 − N_ũ(4d·μ̃), μ̃ = 4d+V_max−μ, for grid μ below the top of the spectrum."""
    c1 = 4 * L_dual.torus.d
    report = LawReport(name="dual law N(mu) >= 1 - N_dual(4d mu~)", n_curve=n)
    for mu, value in zip(n.grid, n.values):
        mu_dual = spectral_top - mu
        if mu_dual <= 0:
            continue
        try:
            rhs = 1.0 - box_counting(L_dual, c1 * mu_dual)
        except ScaleError:
            report.skipped.append(float(mu))
            continue
        report.record(mu, value, rhs, value - rhs)
    return report


class RefinementRatio(BaseModel):
    fine: int
    coarse: int
    count_fine: int
    count_coarse: int
    bound: float

    @property
    def ratio(self) -> float:
        if self.count_coarse == 0:
            return float("nan")
        return self.count_fine / self.count_coarse

    @property
    def within_bound(self) -> bool:
        if self.count_fine == 0 or self.count_coarse == 0:
            return self.count_fine == self.count_coarse
        return 1.0 / self.bound <= self.ratio <= self.bound


def refinement_ratio(L: LandscapeField, mu: float, r: int, r_prime: int) -> RefinementRatio:
    """Counts under P(r) and P(r′) at the same threshold μ, with the bound (r′/r+2)^d."""
    if not 1 <= r < r_prime <= L.torus.K:
        raise ParameterRangeError(f"need 1 <= r < r' <= K, got r={r}, r'={r_prime}")
    return RefinementRatio(
        fine=r,
        coarse=r_prime,
        count_fine=qualifying_boxes(L, mu, r),
        count_coarse=qualifying_boxes(L, mu, r_prime),
        bound=(r_prime / r + 2) ** L.torus.d,
    )


def landscape_model(landscapes: Union[LandscapeField, Sequence[LandscapeField]]) -> BoxModel:
    """μ ↦ N_u(μ), averaged over several landscapes when given a list."""
    if isinstance(landscapes, LandscapeField):
        landscapes = [landscapes]

    def model(mu: np.ndarray) -> np.ndarray:
        return np.mean([[box_counting(L, m) for m in mu] for L in landscapes], axis=0)

    return model


def best_scale(target: np.ndarray, x: np.ndarray) -> Tuple[float, float]:
    """(c₁, t) minimising t = max_i |target_i − c₁x_i| over c₁ >= 0."""
    ones = np.ones_like(x)
    # variables (c1, t): minimise t subject to ±(c1·x − target) <= t
    A = np.vstack([np.column_stack([x, -ones]), np.column_stack([-x, -ones])])
    b = np.concatenate([target, -target])
    result = linprog(c=[0.0, 1.0], A_ub=A, b_ub=b, bounds=[(0, None), (0, None)], method="highs")
    if not result.success:
        raise FitError(f"minimax scale fit failed: {result.message}")
    return float(result.x[0]), float(result.x[1])


def fit_scaling(
    n: CountingCurve,
    target: Union[LandscapeField, Sequence[LandscapeField], BoxModel],
) -> Tuple[float, float, float]:
    """Grid search over c₂, exact minimax c₁ per c₂; ties prefer c₂ nearest 1."""
    if not np.any(n.values > 0):
        raise FitError("cannot fit against an all-zero counting curve")
    model = target if callable(target) else landscape_model(target)
    settings = config.boxcount
    c2_grid = np.union1d(
        np.logspace(np.log10(settings.fit_c2_min), np.log10(settings.fit_c2_max), settings.fit_c2_points),
        [1.0],
    )
    best: Optional[Tuple[float, float, float]] = None
    for c2 in c2_grid:
        try:
            x = np.asarray(model(c2 * n.grid), dtype=float)
        except ScaleError:
            logger.debug(f"c2={c2:.4g} reaches below the scale floor, skipped")
            continue
        if not np.any(x > 0):
            continue
        c1, dist = best_scale(n.values, x)
        if best is None or dist < best[2] - 1e-12 or (
            abs(dist - best[2]) <= 1e-12 and abs(np.log(c2)) < abs(np.log(best[1]))
        ):
            best = (c1, float(c2), dist)
    if best is None:
        raise FitError("every c₂ candidate produced a degenerate or out-of-range model curve")
    logger.info(f"fitted c1={best[0]:.4g}, c2={best[1]:.4g}, sup-distance {best[2]:.4g}")
    return best


def lifschitz_fit(mean_curve: CountingCurve, d: int, window: Tuple[float, float]) -> float:
    """Least-squares slope of log(−log EN) against log μ on the window."""
    lo, hi = window
    mask = (mean_curve.grid >= lo) & (mean_curve.grid <= hi)
    mu = mean_curve.grid[mask]
    values = mean_curve.values[mask]
    if len(mu) < 2:
        raise WindowError(f"window [{lo}, {hi}] holds {len(mu)} grid point(s); need at least 2")
    if np.any(values <= 0) or np.any(values >= 1):
        raise WindowError(f"mean curve leaves (0, 1) inside the window [{lo}, {hi}]")
    slope, _ = np.polyfit(np.log(mu), np.log(-np.log(values)), 1)
    logger.info(f"Lifschitz slope {slope:.4f} (d={d}, leading prediction {-d / 2})")
    return float(slope)


def plateaus(curve: CountingCurve, min_points: int = 3) -> List[Tuple[float, float]]:
    """μ intervals on which the curve is flat and strictly between 0 and 1."""
    runs: List[Tuple[float, float]] = []
    start = 0
    values = curve.values
    for i in range(1, len(values) + 1):
        if i < len(values) and values[i] == values[start]:
            continue
        if i - start >= min_points and 0 < values[start] < 1:
            runs.append((float(curve.grid[start]), float(curve.grid[i - 1])))
        start = i
    return runs


def plateau_coincidence(n: CountingCurve, scaled_nu: CountingCurve) -> List[Dict[str, float]]:
    """For each plateau of N, the share of it covered by plateaus of c₁N_u(c₂·)."""
    theirs = plateaus(scaled_nu)
    report = []
    for lo, hi in plateaus(n):
        width = np.log(hi) - np.log(lo) if lo > 0 else hi - lo
        covered = 0.0
        for a, b in theirs:
            left, right = max(lo, a), min(hi, b)
            if right > left:
                covered += np.log(right) - np.log(left) if left > 0 else right - left
        report.append({"mu_lo": lo, "mu_hi": hi, "overlap": float(covered / width) if width > 0 else 0.0})
    return report
