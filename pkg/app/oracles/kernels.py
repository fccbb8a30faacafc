"""
Discrete Poisson kernel P_r(ξ,·) and Green's function G_r on Q(r;ξ), the
integration-by-parts identity and the surface averages a_r, A_r.
"""
import threading
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import splu

from app.config import config
from app.exceptions import DegenerateCubeError, DimensionMismatchError, KernelCapacityError
from app.logger import logger
from app.oracles.cube import CubeProblem, dirichlet_matrix


class DirichletKernels:
    """Kernels of one cube size, sharing a single factorization of the interior Laplacian."""

    def __init__(self, problem: CubeProblem):
        if problem.r < 1:
            raise DegenerateCubeError("kernels need r >= 1")
        self.problem = problem
        self.box = problem.box
        self.interior_shape = self.box.interior_shape
        self._lu = splu(dirichlet_matrix(self.interior_shape))
        self._boundary_sites = np.argwhere(self.box.boundary_mask())
        self._coupling = self._build_coupling()
        self._poisson: Optional[np.ndarray] = None
        self._poisson_green: Optional[np.ndarray] = None

    def _interior_index(self, local: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(c) - 1 for c in local), self.interior_shape))

    def _build_coupling(self) -> sp.csc_matrix:
        """C[n′, m] = 1 when interior n′ neighbours boundary site m."""
        rows, cols = [], []
        n = 2 * self.problem.r + 1
        for j, site in enumerate(self._boundary_sites):
            for axis in range(self.problem.d):
                for step in (-1, 1):
                    neighbor = site.copy()
                    neighbor[axis] += step
                    if np.all((neighbor >= 1) & (neighbor <= n - 2)):
                        rows.append(self._interior_index(neighbor))
                        cols.append(j)
        shape = (int(np.prod(self.interior_shape)), len(self._boundary_sites))
        return sp.csc_matrix((np.ones(len(rows)), (rows, cols)), shape=shape)

    def _on_boundary(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.box.shape)
        out[tuple(self._boundary_sites.T)] = values
        return out

    def green_column(self, pole: Sequence[int]) -> np.ndarray:
        """G_r(·, m) on the whole cube (zero on ∂Q(r)) for an interior pole m."""
        e = np.zeros(int(np.prod(self.interior_shape)))
        e[self._interior_index(pole)] = 1.0
        out = np.zeros(self.box.shape)
        out[self.box.interior] = self._lu.solve(e).reshape(self.interior_shape)
        return out

    def green_block(self, poles: Sequence[Sequence[int]]) -> np.ndarray:
        """[G_r(n_i, n_j)] for the given interior sites."""
        columns = [self.green_column(p) for p in poles]
        return np.array([[col[tuple(q)] for col in columns] for q in poles])

    def poisson(self) -> np.ndarray:
        """P_r(ξ,·) from one Dirichlet solve per boundary delta."""
        if self._poisson is None:
            # all boundary deltas at once: interior responses, read at ξ
            responses = self._lu.solve(self._coupling.toarray())
            row = self._interior_index(self.problem.center)
            self._poisson = self._on_boundary(responses[row])
        return self._poisson

    def poisson_from_green(self) -> np.ndarray:
        """P_r(ξ,m) = G_r(n′,ξ) with n′ the interior neighbour of m; zero at corners."""
        if self._poisson_green is None:
            g = self.green_column(self.problem.center)[self.box.interior].ravel()
            self._poisson_green = self._on_boundary(self._coupling.T @ g)
        return self._poisson_green

    def path_agreement(self) -> float:
        return float(np.max(np.abs(self.poisson() - self.poisson_from_green())))

    def normalization_error(self) -> float:
        return abs(float(np.sum(self.poisson())) - 1.0)


class KernelCache:
    """Read-mostly memo of kernels per (d, r); writes serialized."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: Dict[Tuple[int, int], DirichletKernels] = {}

    def get(self, problem: CubeProblem) -> DirichletKernels:
        key = (problem.d, problem.r)
        entry = self._entries.get(key)
        if entry is not None:
            return entry
        cap = config.oracles.kernel_caps.get(problem.d)
        if cap is None or problem.r > cap:
            raise KernelCapacityError(f"kernels for d={problem.d}, r={problem.r} exceed the configured cap {cap}")
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                logger.debug(f"factorizing the interior Laplacian of Q({problem.r}) in d={problem.d}")
                entry = DirichletKernels(problem)
                self._entries[key] = entry
        return entry

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


kernel_cache = KernelCache()


def kernels(problem: CubeProblem) -> DirichletKernels:
    return kernel_cache.get(problem)


def ibp_residual(problem: CubeProblem, kern: DirichletKernels, u: np.ndarray) -> float:
    """|u_ξ − Σ_{∂Q}P_r(ξ,m)u_m − Σ_{Q(r−1)}G_r(ξ,m)(−Δu)_m|."""
    box = problem.box
    u = box.check(u)
    if kern.problem != problem:
        raise DimensionMismatchError("kernels belong to a different cube")
    boundary_term = float(np.sum(kern.poisson() * u))
    green = kern.green_column(problem.center)[box.interior]
    volume_term = float(np.sum(green * box.neg_laplacian(u)))
    return abs(u[problem.center] - boundary_term - volume_term)


def ibp_tolerance(u: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.max(np.abs(u))))


class SurfaceAverages(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    a: List[float] = Field(..., description="a_ρ for ρ = 0..r, a_0 = u_ξ")
    A: List[float] = Field(..., description="A_ρ for ρ = 0..r")
    margins: List[float] = Field(..., description="a_ρ − u_ξ + ρ²")

    @property
    def min_margin(self) -> float:
        return min(self.margins)


def shell_weights(problem: CubeProblem) -> np.ndarray:
    """p_n = |∂Q(ρ)|·P_ρ(ξ,n) at shell radius ρ = |n−ξ|_∞ (p_ξ = 1)."""
    weights = np.zeros(problem.shape)
    weights[problem.center] = 1.0
    for rho in range(1, problem.r + 1):
        inner = CubeProblem(d=problem.d, r=rho)
        window = problem.sub_cube(rho)
        weights[window] += inner.boundary_size() * kernels(inner).poisson()
    return weights


def surface_averages(problem: CubeProblem, u: np.ndarray) -> SurfaceAverages:
    """a_ρ = Σ_{∂Q(ρ)}P_ρ(ξ,n)u_n and A_ρ = |Q(ρ)|^{-1} Σ_{ρ′<=ρ} |∂Q(ρ′)| a_ρ′."""
    u = problem.box.check(u)
    u_xi = float(u[problem.center])
    radius = problem.radius().ravel()
    # shell sums of p_n·u_n are |∂Q(ρ)|·a_ρ
    sums = np.bincount(radius, weights=(shell_weights(problem) * u).ravel(), minlength=problem.r + 1)
    sizes = np.bincount(radius, minlength=problem.r + 1)
    a = sums / sizes
    A = np.cumsum(sums) / np.cumsum(sizes)
    margins = [float(a_rho) - u_xi + rho**2 for rho, a_rho in enumerate(a)]
    return SurfaceAverages(a=[float(x) for x in a], A=[float(x) for x in A], margins=margins)
