"""
Maximum principle, Poincaré inequality, torsion comparison and the
sub-mean value property on boxes of Z^d.
"""
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from app.config import config
from app.exceptions import PreconditionError
from app.oracles.cube import CubeProblem, LatticeBox, comparison_function, dirichlet_solve, torsion
from app.oracles.kernels import kernels


class CheckResult(BaseModel):
    """Outcome of one oracle instance: lhs compared to rhs, with the first failing site."""

    passed: bool
    lhs: float
    rhs: float
    witness: Optional[Tuple[int, ...]] = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _first_site(mask: np.ndarray, offset: int = 0) -> Tuple[int, ...]:
    return tuple(int(c) + offset for c in np.argwhere(mask)[0])


def require_subsolution(box: LatticeBox, f: np.ndarray, V: Union[float, np.ndarray] = 0.0) -> None:
    """−(Δf)_n + v_n f_n >= 0 on the interior, to the configured per-site slack."""
    values = box.neg_laplacian(f) + np.broadcast_to(V, box.interior_shape) * f[box.interior]
    bad = values < -config.oracles.subsolution_tol * (1.0 + np.abs(f[box.interior]))
    if np.any(bad):
        site = _first_site(bad, offset=1)
        raise PreconditionError(f"not a sub-solution at local site {site}", site=site)


def max_principle_check(box: LatticeBox, V: Union[float, np.ndarray], f: np.ndarray) -> CheckResult:
    """min over the interior >= min over ∂°Q (>= min(0, min ∂°Q) when V ≢ 0)."""
    f = box.check(f)
    require_subsolution(box, f, V)
    if not box.has_interior:
        return CheckResult(passed=True, lhs=0.0, rhs=0.0)
    floor = float(np.min(f[box.flat_boundary_mask()]))
    if np.any(np.asarray(V) != 0):
        floor = min(0.0, floor)
    inner = f[box.interior]
    below = inner < floor - 1e-12 * (1.0 + abs(floor))
    witness = _first_site(below, offset=1) if np.any(below) else None
    return CheckResult(passed=witness is None, lhs=floor, rhs=float(np.min(inner)), witness=witness)


def random_subsolution(box: LatticeBox, rng: np.random.Generator, with_potential: bool = False):
    """(V, f) with −Δf + Vf = g >= 0 inside and random boundary data."""
    scale = 10.0 ** rng.uniform(-2, 2)
    h = rng.normal(0.0, scale, box.shape)
    g = rng.uniform(0.0, scale, box.interior_shape) * (rng.random(box.interior_shape) < 0.5)
    V = rng.uniform(0.0, 4.0, box.interior_shape) if with_potential else 0.0
    return V, dirichlet_solve(box, g, h, V if with_potential else None)


def poincare_check(box: LatticeBox, f: np.ndarray) -> CheckResult:
    """Σ(f−f̄)² <= (d/2)ℓ_max² Σ ‖∇f‖² over edges inside the box."""
    f = box.check(f)
    lhs = float(np.sum((f - f.mean()) ** 2))
    energy = sum(float(np.sum(np.diff(f, axis=axis) ** 2)) for axis in range(box.d))
    rhs = box.d / 2.0 * box.side**2 * energy
    return CheckResult(passed=lhs <= rhs + 1e-12 * (1.0 + rhs), lhs=lhs, rhs=rhs)


def torsion_comparison_check(d: int, r: int) -> CheckResult:
    """Torsion function of Q(r) against u″ = r²/2 − |n−ξ|²/(2d)."""
    problem = CubeProblem(d=d, r=r)
    w = torsion(problem)
    bound = comparison_function(r, d)
    gap = w - bound
    bad = gap > 1e-9 * (1.0 + r**2)
    witness = _first_site(bad) if np.any(bad) else None
    return CheckResult(passed=witness is None, lhs=float(np.max(gap)), rhs=0.0, witness=witness)


class SubmeanReport(BaseModel):
    passed: bool
    value: float
    surface_average: float
    boundary_ratio: float
    volume_ratio: float


def submean_check(problem: CubeProblem, f: np.ndarray) -> SubmeanReport:
    """f_ξ against its Poisson average, plus f_ξ r^{d−1}/Σ_∂Q f and f_ξ r^d/Σ_Q f."""
    box = problem.box
    f = box.check(f)
    if np.any(f < 0):
        raise PreconditionError("sub-mean check needs f >= 0", site=_first_site(f < 0))
    bad = box.neg_laplacian(f) > config.oracles.subsolution_tol * (1.0 + np.abs(f[box.interior]))
    if np.any(bad):
        site = _first_site(bad, offset=1)
        raise PreconditionError(f"f is not subharmonic at local site {site}", site=site)
    r, d = problem.r, problem.d
    value = float(f[problem.center])
    average = float(np.sum(kernels(problem).poisson() * f))
    boundary_sum = float(np.sum(f[box.boundary_mask()]))
    total = float(np.sum(f))
    return SubmeanReport(
        passed=value <= average + 1e-10 * (1.0 + abs(average)),
        value=value,
        surface_average=average,
        boundary_ratio=value * r ** (d - 1) / boundary_sum if boundary_sum > 0 else 0.0,
        volume_ratio=value * r**d / total if total > 0 else 0.0,
    )


def random_subharmonic(problem: CubeProblem, rng: np.random.Generator) -> np.ndarray:
    """Nonnegative f with −Δf = −g <= 0 inside and nonnegative boundary data."""
    box = problem.box
    h = rng.uniform(0.0, 1.0, box.shape) * 10.0 ** rng.uniform(-1, 2)
    g = rng.uniform(0.0, 1.0, box.interior_shape) * (rng.random(box.interior_shape) < 0.3)
    f = dirichlet_solve(box, -g, h)
    # a constant shift keeps f subharmonic
    return f + max(0.0, -float(np.min(f)))
