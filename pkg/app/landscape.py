"""
The landscape equation Hu = 1, the effective potential 1/u, the landscape
uncertainty identity and the scaling (doubling) audit.
"""
from pathlib import Path
from typing import Dict, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.sparse.linalg import LinearOperator, cg, splu

from app.config import config
from app.exceptions import (
    DimensionMismatchError,
    IncompatiblePeriodError,
    InvalidPotentialError,
    IterationLimitError,
    ScaleError,
    SingularOperatorError,
)
from app.lattice import ScalarField, Torus
from app.logger import logger
from app.operator import Hamiltonian, apply, assemble, quadratic_form
from app.potentials import PotentialField, explicit_potential, read_flat_field


SolverPath = Literal["auto", "direct", "cg"]


class LandscapeField(BaseModel):
    """Positive solution u of Hu = 1 together with the solver residual."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    torus: Torus
    u: np.ndarray
    residual_norm: float = 0.0
    method: str = "direct"
    tolerance: float = 1e-10

    @property
    def effective(self) -> np.ndarray:
        """W = 1/u."""
        return 1.0 / self.u

    def to_text(self, digits: int = 17) -> str:
        flat = " ".join(f"{x:.{digits}g}" for x in self.u.ravel())
        return f"{self.torus.d} {self.torus.K}\n{flat}\n"

    def write(self, path: Path, header: str = "") -> None:
        meta = f"# solver: {self.method}\n# residual_norm: {self.residual_norm:.3e}\n# tolerance: {self.tolerance:.1e}\n"
        Path(path).write_text(header + meta + self.to_text(), encoding="utf-8")

    @classmethod
    def read(cls, path: Path) -> "LandscapeField":
        torus, values = read_flat_field(path)
        return cls(torus=torus, u=values, method="file")


def _direct_solve(H: Hamiltonian, rhs: np.ndarray) -> np.ndarray:
    lu = splu(H.matrix.tocsc())
    u = lu.solve(rhs)
    # one step of iterative refinement
    return u + lu.solve(rhs - H.matrix @ u)


def _cg_solve(H: Hamiltonian, rhs: np.ndarray) -> np.ndarray:
    diag = H.matrix.diagonal()
    jacobi = LinearOperator(H.matrix.shape, matvec=lambda x: x / diag, dtype=float)
    maxiter = config.solver.max_iter_factor * H.size
    u, info = cg(H.matrix, rhs, rtol=config.solver.cg_rtol, maxiter=maxiter, M=jacobi)
    if info > 0:
        residual = float(np.max(np.abs(H.matrix @ u - rhs)))
        raise IterationLimitError(
            f"conjugate gradient stopped after {info} iterations with residual {residual:.3e}",
            residual=residual,
        )
    return u


def solve_landscape(
    H: Hamiltonian, method: SolverPath = "auto", allow_constant: bool = False
) -> LandscapeField:
    """Solve Hu = 1 on the torus."""
    V = H.potential
    if V.is_zero:
        raise SingularOperatorError("V is identically 0, so H has the constants in its kernel")
    if V.is_constant and not allow_constant:
        raise InvalidPotentialError("constant potential is flagged; pass allow_constant to solve it")
    if V.is_constant:
        logger.warning(f"Solving the landscape of a flagged constant potential {V.describe()}")

    if method == "auto":
        method = "direct" if H.size <= config.solver.direct_max_sites else "cg"
    rhs = np.ones(H.size)
    u = _direct_solve(H, rhs) if method == "direct" else _cg_solve(H, rhs)

    u = u.reshape(H.torus.shape)
    residual = float(np.max(np.abs(apply(H, u) - 1.0)))
    tol = config.solver.residual_tol
    logger.debug(f"landscape solved by {method} on {V.describe()}, residual {residual:.3e}")
    if residual > tol:
        raise IterationLimitError(
            f"landscape residual {residual:.3e} exceeds tolerance {tol:.1e} ({method})",
            residual=residual,
        )
    return LandscapeField(torus=H.torus, u=u, residual_norm=residual, method=method, tolerance=tol)


def landscape_floor_margin(H: Hamiltonian, L: LandscapeField) -> float:
    """min u − 1/V_max; nonnegative up to solver slack."""
    return float(np.min(L.u) - 1.0 / H.potential.vmax)


def gradient_energy(t: Torus, f: ScalarField, u: np.ndarray) -> float:
    """Σ_n Σ_i u_{n+e_i} u_n (∇_i (f/u)_n)²."""
    ratio = t.field(f) / u
    total = 0.0
    for axis in range(t.d):
        shifted_u = np.roll(u, -1, axis=axis)
        diff = np.roll(ratio, -1, axis=axis) - ratio
        total += float(np.sum(shifted_u * u * diff**2))
    return total


def uncertainty_residual(H: Hamiltonian, L: LandscapeField, f: ScalarField) -> float:
    """|⟨f,Hf⟩ − Σ u_{n+e_i}u_n(∇_i(f/u))² − Σ f_n²/u_n|."""
    if L.torus != H.torus:
        raise DimensionMismatchError("landscape and operator live on different tori")
    arr = H.torus.field(f)
    lhs = quadratic_form(H, arr)
    rhs = gradient_energy(H.torus, arr, L.u) + float(np.sum(arr**2 / L.u))
    return abs(lhs - rhs)


def uncertainty_tolerance(H: Hamiltonian, f: ScalarField) -> float:
    return 1e-8 * (1.0 + quadratic_form(H, f))


def periodic_window_sums(values: np.ndarray, width: int) -> np.ndarray:
    """Sum over the box [x, x+width)^d for every anchor x, with periodic wrap."""
    out = np.asarray(values, dtype=float)
    for axis in range(out.ndim):
        n = out.shape[axis]
        ext = np.concatenate([out, np.take(out, np.arange(width), axis=axis)], axis=axis)
        cs = np.cumsum(ext, axis=axis)
        zero_shape = list(cs.shape)
        zero_shape[axis] = 1
        cs = np.concatenate([np.zeros(zero_shape), cs], axis=axis)
        upper = np.take(cs, np.arange(width, width + n), axis=axis)
        lower = np.take(cs, np.arange(n), axis=axis)
        out = upper - lower
    return out


def scaling_constant(L: LandscapeField, ell: int) -> float:
    """Smallest C_S at side ℓ: max over anchors of Σ_{3Q}u² / (Σ_Q u² + ℓ^{d+4})."""
    t = L.torus
    if ell < 1 or 3 * ell > t.K:
        raise ScaleError(f"scaling audit needs 1 <= ℓ and 3ℓ <= K={t.K}, got ℓ={ell}")
    sq = L.u**2
    inner = periodic_window_sums(sq, ell)
    outer = np.roll(periodic_window_sums(sq, 3 * ell), ell, axis=tuple(range(t.d)))
    ratio = outer / (inner + float(ell) ** (t.d + 4))
    return float(np.max(ratio))


def scaling_audit(L: LandscapeField, ells: Sequence[int]) -> Dict[int, float]:
    """C_S*(ℓ) for each requested scale; the audit value is the max."""
    return {int(ell): scaling_constant(L, ell) for ell in ells}


def periodic_cell_landscape(V: PotentialField, period: int) -> LandscapeField:
    """Landscape on the fundamental cell ⟦1,p⟧^d with periodic boundary conditions."""
    t = V.torus
    if period < 3 or t.K % period:
        raise IncompatiblePeriodError(f"cell side {period} must be at least 3 and divide K={t.K}")
    cell = V.values[(slice(0, period),) * t.d]
    if not np.array_equal(np.tile(cell, (t.K // period,) * t.d), V.values):
        raise IncompatiblePeriodError(f"{V.describe()} is not {period}-periodic")
    cell_torus = Torus(d=t.d, K=period)
    return solve_landscape(assemble(cell_torus, explicit_potential(cell_torus, cell)))


def periodic_extension(cell_landscape: LandscapeField, t: Torus) -> np.ndarray:
    p = cell_landscape.torus.K
    if t.K % p:
        raise DimensionMismatchError(f"cell side {p} does not divide K={t.K}")
    return np.tile(cell_landscape.u, (t.K // p,) * t.d)
