"""
The tight-binding Hamiltonian H = −Δ + V on the torus.
"""
from functools import reduce

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict

from app.exceptions import DimensionMismatchError, ParityError, TorusMismatchError
from app.lattice import ScalarField, Torus, gradient_norm_sq
from app.potentials import PotentialField, dual_potential


def periodic_laplacian_1d(K: int) -> sp.csr_matrix:
    """−Δ on Z/KZ: 2 on the diagonal, −1 on both (wrapped) neighbours."""
    off = np.ones(K - 1)
    lap = sp.diags([-off, 2.0 * np.ones(K), -off], [-1, 0, 1], format="lil")
    lap[0, K - 1] = -1.0
    lap[K - 1, 0] = -1.0
    return lap.tocsr()


def periodic_laplacian(t: Torus) -> sp.csr_matrix:
    """−Δ on (Z/KZ)^d in the row-major site order."""
    lap_1d = periodic_laplacian_1d(t.K)
    eye = sp.identity(t.K, format="csr")
    terms = []
    for axis in range(t.d):
        factors = [lap_1d if i == axis else eye for i in range(t.d)]
        terms.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), factors))
    return reduce(lambda a, b: a + b, terms).tocsr()


class Hamiltonian(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    torus: Torus
    potential: PotentialField
    matrix: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.torus.volume

    @property
    def spectral_top(self) -> float:
        """4d + V_max with the reference V_max; the spectrum lies below it."""
        return 4.0 * self.torus.d + self.potential.reference_vmax

    def dual(self) -> "Hamiltonian":
        """H̃ = −Δ + V_max − V."""
        return assemble(self.torus, dual_potential(self.potential))


def assemble(t: Torus, V: PotentialField) -> Hamiltonian:
    if V.torus != t:
        raise TorusMismatchError(f"potential lives on {V.torus}, operator requested on {t}")
    matrix = periodic_laplacian(t) + sp.diags(V.values.ravel(), format="csr")
    return Hamiltonian(torus=t, potential=V, matrix=matrix.tocsr())


def apply(H: Hamiltonian, phi: ScalarField) -> ScalarField:
    """Matrix-free stencil (Hφ)_n = −Σ_{|m−n|=1}(φ_m − φ_n) + v_n φ_n."""
    arr = np.asarray(phi, dtype=float)
    if arr.size != H.size:
        raise DimensionMismatchError(f"field has {arr.size} values, operator acts on {H.size}")
    arr = arr.reshape(H.torus.shape)
    out = (2.0 * H.torus.d + H.potential.values) * arr
    for axis in range(H.torus.d):
        out -= np.roll(arr, 1, axis=axis) + np.roll(arr, -1, axis=axis)
    return out


def quadratic_form(H: Hamiltonian, f: ScalarField) -> float:
    """⟨f, Hf⟩ = Σ‖∇f_n‖² + Σ v_n f_n²."""
    arr = H.torus.field(f)
    return float(np.sum(gradient_norm_sq(H.torus, arr)) + np.sum(H.potential.values * arr**2))


def sign_pattern(t: Torus) -> np.ndarray:
    """(−1)^{s(n)} with s(n) = Σ n_j over 1-based coordinates."""
    if t.K % 2:
        raise ParityError(f"the sign pattern is only periodic for even K, got K={t.K}")
    total = sum(np.indices(t.shape)) + t.d
    return np.where(total % 2 == 0, 1.0, -1.0)


def dual_vector(t: Torus, phi: ScalarField) -> ScalarField:
    """φ̃_n = (−1)^{s(n)} φ_n."""
    return sign_pattern(t) * t.field(phi)
