"""
Boxes of Z^d with Dirichlet boundaries: interior, inner boundary ∂Q, flat
boundary ∂°Q, the centred cubes Q(r;ξ) and the Dirichlet problem on them.

Arrays are indexed by local coordinates 0..ℓ_i−1; there is no wrap.
"""
from functools import reduce
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.sparse.linalg import splu

from app.config import config
from app.exceptions import DegenerateCubeError, DimensionMismatchError, IterationLimitError, ScaleError
from app.lattice import ScalarField, Torus


class LatticeBox(BaseModel):
    """⟦0,ℓ_1−1⟧×…×⟦0,ℓ_d−1⟧ ⊂ Z^d."""

    model_config = ConfigDict(frozen=True)

    lengths: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self) -> "LatticeBox":
        if not self.lengths or min(self.lengths) < 1:
            raise DegenerateCubeError(f"box lengths must be positive, got {self.lengths}")
        return self

    @property
    def d(self) -> int:
        return len(self.lengths)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.lengths)

    @property
    def side(self) -> int:
        return max(self.lengths)

    @property
    def cardinality(self) -> int:
        return int(np.prod(self.lengths))

    @property
    def interior_shape(self) -> Tuple[int, ...]:
        return tuple(max(0, n - 2) for n in self.lengths)

    @property
    def has_interior(self) -> bool:
        return min(self.lengths) >= 3

    @property
    def interior(self) -> Tuple[slice, ...]:
        return (slice(1, -1),) * self.d

    def _extreme_axes(self) -> np.ndarray:
        count = np.zeros(self.shape, dtype=int)
        for axis, n in enumerate(self.lengths):
            local = np.arange(n)
            shape = [1] * self.d
            shape[axis] = n
            count += ((local == 0) | (local == n - 1)).reshape(shape).astype(int)
        return count

    def interior_mask(self) -> np.ndarray:
        return self._extreme_axes() == 0

    def boundary_mask(self) -> np.ndarray:
        """∂Q: sites with a neighbour outside the box."""
        return self._extreme_axes() >= 1

    def flat_boundary_mask(self) -> np.ndarray:
        """∂°Q: boundary sites extreme along exactly one axis."""
        return self._extreme_axes() == 1

    def neighbor_sum(self, u: np.ndarray) -> np.ndarray:
        """Σ_{|m−n|=1} u_m for every interior n."""
        total = np.zeros(self.interior_shape)
        for axis in range(self.d):
            for lo, hi in ((0, -2), (2, None)):
                index = [slice(1, -1)] * self.d
                index[axis] = slice(lo, hi)
                total += u[tuple(index)]
        return total

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        """−(Δu)_n on the interior."""
        u = self.check(u)
        return 2.0 * self.d * u[self.interior] - self.neighbor_sum(u)

    def check(self, u) -> np.ndarray:
        arr = np.asarray(u, dtype=float)
        if arr.shape != self.shape:
            raise DimensionMismatchError(f"field has shape {arr.shape}, box is {self.shape}")
        return arr

    def middle_third(self) -> Tuple[slice, ...]:
        """Ω inside a tripled box 3Ω (every side a multiple of 3)."""
        if any(n % 3 for n in self.lengths):
            raise DegenerateCubeError(f"box {self.lengths} is not a tripled cube")
        return tuple(slice(n // 3, 2 * n // 3) for n in self.lengths)


def make_box(lengths: Union[int, Sequence[int]], d: Optional[int] = None) -> LatticeBox:
    if isinstance(lengths, (int, np.integer)):
        lengths = (int(lengths),) * (d or 1)
    return LatticeBox(lengths=tuple(int(n) for n in lengths))


def dirichlet_matrix(interior_shape: Sequence[int]) -> sp.csc_matrix:
    """−Δ on the interior with zero boundary values: Σ_i I⊗…⊗tridiag(−1,2,−1)⊗…⊗I."""
    factors_1d = [
        sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1], format="csr")
        for m in interior_shape
    ]
    terms = []
    for axis in range(len(interior_shape)):
        factors = [
            factors_1d[i] if i == axis else sp.identity(m, format="csr") for i, m in enumerate(interior_shape)
        ]
        terms.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), factors))
    return reduce(lambda a, b: a + b, terms).tocsc()


def boundary_coupling(box: LatticeBox, h: np.ndarray) -> np.ndarray:
    """Contribution of the boundary values to the interior equations."""
    h0 = np.array(h, dtype=float)
    h0[box.interior] = 0.0
    return box.neighbor_sum(h0)


def dirichlet_solve(
    box: LatticeBox,
    f: Union[float, np.ndarray],
    h: Union[float, np.ndarray],
    V: Union[float, np.ndarray, None] = None,
) -> np.ndarray:
    """Solve −(Δu)_n + v_n u_n = f_n inside the box with u = h on ∂Q."""
    u = np.broadcast_to(np.asarray(h, dtype=float), box.shape).copy()
    if not box.has_interior:
        return u
    rhs = np.broadcast_to(np.asarray(f, dtype=float), box.interior_shape)
    A = dirichlet_matrix(box.interior_shape)
    potential = None
    if V is not None:
        potential = np.broadcast_to(np.asarray(V, dtype=float), box.interior_shape)
        A = (A + sp.diags(potential.ravel())).tocsc()
    b = (rhs + boundary_coupling(box, u)).ravel()
    lu = splu(A)
    x = lu.solve(b)
    x = x + lu.solve(b - A @ x)
    u[box.interior] = x.reshape(box.interior_shape)

    residual = box.neg_laplacian(u) - rhs
    if potential is not None:
        residual = residual + potential * u[box.interior]
    scale = max(1.0, float(np.max(np.abs(u))))
    worst = float(np.max(np.abs(residual)))
    if worst > config.oracles.subsolution_tol * scale:
        raise IterationLimitError(f"Dirichlet residual {worst:.3e} on box {box.lengths}", residual=worst)
    return u


class CubeProblem(BaseModel):
    """Q(r;ξ) = {|m−ξ|_∞ <= r}, stored with ξ at local index (r,…,r)."""

    model_config = ConfigDict(frozen=True)

    d: int
    r: int

    @model_validator(mode="after")
    def _check(self) -> "CubeProblem":
        if self.d < 1 or self.r < 0:
            raise DegenerateCubeError(f"cube needs d >= 1 and r >= 0, got d={self.d}, r={self.r}")
        return self

    @property
    def box(self) -> LatticeBox:
        return make_box(2 * self.r + 1, self.d)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.box.shape

    @property
    def center(self) -> Tuple[int, ...]:
        return (self.r,) * self.d

    def radius(self) -> np.ndarray:
        """|m−ξ|_∞ for every site."""
        grids = np.indices(self.shape) - self.r
        return np.max(np.abs(grids), axis=0)

    def shell_mask(self, rho: int) -> np.ndarray:
        """∂Q(ρ;ξ) inside Q(r;ξ)."""
        return self.radius() == rho

    def sub_cube(self, rho: int) -> Tuple[slice, ...]:
        if not 0 <= rho <= self.r:
            raise DegenerateCubeError(f"radius {rho} outside 0..{self.r}")
        return (slice(self.r - rho, self.r + rho + 1),) * self.d

    def boundary_size(self) -> int:
        return int(np.count_nonzero(self.box.boundary_mask()))

    def interior_size(self) -> int:
        return int(np.prod(self.box.interior_shape)) if self.r >= 1 else 0


def torsion(problem: CubeProblem) -> np.ndarray:
    """The zero-Dirichlet torsion function: −Δw = 1 inside Q(r), w = 0 on ∂Q(r)."""
    return dirichlet_solve(problem.box, 1.0, 0.0)


def comparison_function(r: int, d: int) -> np.ndarray:
    """u″_n = r²/2 − |n−ξ|²/(2d) on Q(r;ξ); −Δu″ = 1 and u″ >= 0 on ∂Q(r)."""
    grids = np.indices((2 * r + 1,) * d) - r
    return r**2 / 2.0 - np.sum(grids.astype(float) ** 2, axis=0) / (2.0 * d)


def torus_window(t: Torus, field: ScalarField, center: Sequence[int], r: int) -> np.ndarray:
    """Copy of a torus field on Q(r;ξ), ξ a 1-based site; needs 2r+1 <= K."""
    if 2 * r + 1 > t.K:
        raise ScaleError(f"window of radius {r} does not fit in K={t.K}")
    xi = t.normalize(center)
    axes = [(np.arange(-r, r + 1) + c - 1) % t.K for c in xi]
    return np.asarray(field).reshape(t.shape)[np.ix_(*axes)]


def box_window(t: Torus, field: ScalarField, anchor: Sequence[int], lengths: Sequence[int]) -> np.ndarray:
    """Copy of a torus field on the box anchored at a 1-based site; needs every length <= K."""
    return t.cube(anchor, lengths).restrict(np.asarray(field).reshape(t.shape))
