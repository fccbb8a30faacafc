"""
Exact eigenvalue counting for N(μ) and its strict variant, full spectra at
small sizes and the dual-spectrum identity.

Counting takes one of two routes: a full symmetric eigendecomposition when
K^d is at most `spectrum.dense_max_sites`, otherwise Sylvester inertia of the
shifted operator H − (μ ± ε_tie)I read off a symmetric SuperLU factorization.
"""
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.sparse.linalg import splu
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.config import config
from app.exceptions import DimensionMismatchError, ParityError, PivotBreakdown, ShiftDegeneracyError
from app.logger import logger
from app.operator import Hamiltonian


CountMethod = Literal["auto", "dense", "inertia"]


class Spectrum(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eigenvalues: np.ndarray

    def count_leq(self, mu: float) -> int:
        eps = tie_epsilon(mu)
        return int(np.searchsorted(self.eigenvalues, mu + eps, side="right"))

    def count_lt(self, mu: float) -> int:
        eps = tie_epsilon(mu)
        return int(np.searchsorted(self.eigenvalues, mu - eps, side="right"))

    def check(self, H: Hamiltonian) -> Dict[str, float]:
        """Deviation of the spectrum from [0, 4d+V_max] and from the trace."""
        trace = float(np.sum(2.0 * H.torus.d + H.potential.values))
        return {
            "below_zero": float(max(0.0, -self.eigenvalues[0])),
            "above_top": float(max(0.0, self.eigenvalues[-1] - H.spectral_top)),
            "trace_error": abs(float(np.sum(self.eigenvalues)) - trace) / max(trace, 1.0),
        }


class CountingCurve(BaseModel):
    """A counting function sampled on a μ grid, normalised by K^d."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    values: np.ndarray
    kind: str = Field(..., description="N, N_strict, N_u, Nu_dual or an ensemble mean of these")
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("grid", "values", mode="before")
    @classmethod
    def _as_array(cls, v):
        return np.array(v, dtype=float)

    def is_monotone(self) -> bool:
        finite = self.values[np.isfinite(self.values)]
        return bool(np.all(np.diff(finite) >= 0))

    def to_csv(self, digits: Optional[int] = None) -> str:
        digits = digits or config.output.significant_digits
        rows = ["mu,value,kind"]
        rows += [f"{mu:.{digits}g},{v:.{digits}g},{self.kind}" for mu, v in zip(self.grid, self.values)]
        return "\n".join(rows) + "\n"

    def write(self, path: Path, header: str = "") -> None:
        Path(path).write_text(header + self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "CountingCurve":
        rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
        if not rows or rows[0].strip() != "mu,value,kind":
            raise DimensionMismatchError("counting curve CSV needs the header `mu,value,kind`")
        grid, values, kinds = [], [], set()
        for row in rows[1:]:
            mu, value, kind = row.split(",")
            grid.append(float(mu))
            values.append(float(value))
            kinds.add(kind.strip())
        return cls(grid=grid, values=values, kind=kinds.pop() if len(kinds) == 1 else "mixed")

    @classmethod
    def read(cls, path: Path) -> "CountingCurve":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


def tie_epsilon(mu: float) -> float:
    return config.spectrum.tie_epsilon * (1.0 + abs(mu))


def spectrum(H: Hamiltonian) -> Spectrum:
    """All K^d eigenvalues, ascending."""
    dense = H.matrix.toarray()
    return Spectrum(eigenvalues=np.linalg.eigvalsh(dense))


def negative_pivots(H: Hamiltonian, shift: float) -> int:
    """Number of negative eigenvalues of H − shift·I by Sylvester's law of inertia."""
    A = (H.matrix - shift * sp.identity(H.size, format="csr")).tocsc()
    try:
        lu = splu(
            A,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as e:
        raise PivotBreakdown(f"factorization of H - {shift!r} I failed: {e}") from e
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise PivotBreakdown(f"off-diagonal pivoting at shift {shift!r}")
    pivots = lu.U.diagonal()
    scale = np.finfo(float).eps * max(1.0, float(np.max(np.abs(pivots))))
    if np.any(np.abs(pivots) <= scale):
        raise PivotBreakdown(f"near-zero pivot at shift {shift!r}")
    return int(np.count_nonzero(pivots < 0))


def _count_by_inertia(H: Hamiltonian, mu: float, direction: int) -> int:
    eps = tie_epsilon(mu)
    retries = config.spectrum.shift_retries
    try:
        for attempt in Retrying(
            stop=stop_after_attempt(retries + 1),
            retry=retry_if_exception_type(PivotBreakdown),
            reraise=True,
        ):
            with attempt:
                n = attempt.retry_state.attempt_number
                if n > 1:
                    logger.debug(f"retrying inertia count at mu={mu!r} with eps={eps * 2 ** (n - 1):.3e}")
                return negative_pivots(H, mu + direction * eps * 2 ** (n - 1))
    except PivotBreakdown as e:
        raise ShiftDegeneracyError(
            f"shifted factorization at mu={mu!r} broke down after {retries} retries: {e.message}"
        ) from e


def _resolve(H: Hamiltonian, method: CountMethod) -> str:
    if method == "auto":
        return "dense" if H.size <= config.spectrum.dense_max_sites else "inertia"
    return method


def count_leq(H: Hamiltonian, mu: float, method: CountMethod = "auto") -> int:
    """#{λ ∈ σ(H) : λ ≤ μ}."""
    if _resolve(H, method) == "dense":
        return spectrum(H).count_leq(mu)
    return _count_by_inertia(H, mu, +1)


def count_lt(H: Hamiltonian, mu: float, method: CountMethod = "auto") -> int:
    """#{λ ∈ σ(H) : λ < μ}."""
    if _resolve(H, method) == "dense":
        return spectrum(H).count_lt(mu)
    return _count_by_inertia(H, mu, -1)


def counts(H: Hamiltonian, grid: Sequence[float], strict: bool = False, method: CountMethod = "auto") -> List[int]:
    """Counts on a whole grid; the dense route decomposes once."""
    if _resolve(H, method) == "dense":
        spec = spectrum(H)
        count = spec.count_lt if strict else spec.count_leq
        return [count(float(mu)) for mu in grid]
    direction = -1 if strict else +1
    return [_count_by_inertia(H, float(mu), direction) for mu in grid]


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if np.any(np.diff(arr) < 0):
        raise DimensionMismatchError("μ grid must be sorted")
    return arr


def ids_curve(H: Hamiltonian, grid: Sequence[float], strict: bool = False, method: CountMethod = "auto") -> CountingCurve:
    """N(μ) = K^{-d}·count_leq on the grid (N⁻ with strict=True)."""
    arr = _check_grid(grid)
    values = np.array(counts(H, arr, strict=strict, method=method), dtype=float) / H.size
    return CountingCurve(
        grid=arr,
        values=values,
        kind="N_strict" if strict else "N",
        metadata={"d": H.torus.d, "K": H.torus.K, "potential": H.potential.describe(), "seed": H.potential.seed},
    )


def dual_identity_check(H: Hamiltonian, grid: Sequence[float], method: CountMethod = "auto") -> int:
    """max_μ |count_leq(H, μ) + count_lt(H̃, 4d+V_max−μ) − K^d|; 0 when the identity holds."""
    if H.torus.K % 2:
        raise ParityError(f"the dual identity needs an even K, got K={H.torus.K}")
    arr = _check_grid(grid)
    dual = H.dual()
    left = counts(H, arr, method=method)
    # μ̃ decreases along the grid; counts() takes any order for the dense route
    mirrored = [H.spectral_top - mu for mu in arr]
    right = counts(dual, mirrored, strict=True, method=method)
    return int(max(abs(a + b - H.size) for a, b in zip(left, right)))


def dual_spectrum_deviation(H: Hamiltonian) -> float:
    """max |λ̃_k − (4d+V_max−λ)_k| over the sorted spectra of H̃ and H."""
    if H.torus.K % 2:
        raise ParityError(f"the dual spectrum identity needs an even K, got K={H.torus.K}")
    lam = spectrum(H).eigenvalues
    lam_dual = spectrum(H.dual()).eigenvalues
    return float(np.max(np.abs(np.sort(H.spectral_top - lam) - lam_dual)))
