"""
Harnack inequality with the explicit chain constant (2d+V_max)^{dℓ}, the
Moser–Harnack extremal ratio and a drift guard for measured constants.
"""
import math
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel

from app.config import config
from app.exceptions import PreconditionError
from app.oracles.cube import LatticeBox, dirichlet_solve, make_box
from app.oracles.principles import CheckResult, _first_site


def harnack_check(
    box: LatticeBox,
    V: Union[float, np.ndarray],
    f: np.ndarray,
    v_max: Optional[float] = None,
) -> CheckResult:
    """sup_Q f <= (2d+V_max)^{d·ℓ(Q)} inf_Q f on Q = interior of the box.

    f must be a nonnegative super-solution −Δf + Vf >= 0 on Q; V is given on Q.
    Both sides are compared in log scale.
    """
    f = box.check(f)
    if not box.has_interior:
        return CheckResult(passed=True, lhs=0.0, rhs=0.0)
    potential = np.broadcast_to(np.asarray(V, dtype=float), box.interior_shape)
    if np.any(f < 0):
        raise PreconditionError("Harnack check needs f >= 0", site=_first_site(f < 0))
    inner = f[box.interior]
    defect = box.neg_laplacian(f) + potential * inner
    bad = defect < -config.oracles.subsolution_tol * (1.0 + np.abs(inner))
    if np.any(bad):
        site = _first_site(bad, offset=1)
        raise PreconditionError(f"not a super-solution at local site {site}", site=site)

    v_max = float(np.max(potential)) if v_max is None else v_max
    ell = max(box.interior_shape)
    sup, inf = float(np.max(inner)), float(np.min(inner))
    log_bound = box.d * ell * math.log(2 * box.d + v_max)
    if inf <= 0:
        return CheckResult(passed=sup <= 0, lhs=sup, rhs=0.0)
    lhs = math.log(sup) - math.log(inf)
    return CheckResult(passed=lhs <= log_bound + math.log1p(1e-9), lhs=lhs, rhs=log_bound)


def moser_harnack_ratio(domain: LatticeBox, g: np.ndarray) -> float:
    """(Σ_{3Ω} g²/ℓ^d + ℓ⁴)/sup_Ω g² with 3Ω the interior of the domain.

    g must satisfy g >= 0 and −Δg <= 1 on 3Ω.
    """
    g = domain.check(g)
    tripled = g[domain.interior]
    if np.any(tripled < 0):
        raise PreconditionError("Moser-Harnack needs g >= 0 on 3Ω", site=_first_site(tripled < 0, offset=1))
    bad = domain.neg_laplacian(g) > 1.0 + config.oracles.subsolution_tol * (1.0 + np.abs(tripled))
    if np.any(bad):
        site = _first_site(bad, offset=1)
        raise PreconditionError(f"−Δg exceeds 1 at local site {site}", site=site)
    inner_box = make_box(tripled.shape)
    ell = inner_box.side // 3
    peak = float(np.max(tripled[inner_box.middle_third()] ** 2))
    if peak == 0:
        return math.inf
    return (float(np.sum(tripled**2)) / ell**domain.d + ell**4) / peak


def random_moser_harnack_instance(d: int, ell: int, rng: np.random.Generator):
    """Domain of side 3ℓ+2 and g with −Δg = f ∈ [0,1] inside, boundary data >= 0."""
    domain = make_box(3 * ell + 2, d)
    scale = ell**2 * 10.0 ** rng.uniform(-2, 2)
    h = rng.uniform(0.0, 1.0, domain.shape) * scale
    f = rng.uniform(0.0, 1.0, domain.interior_shape)
    return domain, dirichlet_solve(domain, f, h)


def moser_harnack_constant(d: int, ell: int, trials: int, rng: np.random.Generator) -> float:
    """ĉ_H: the smallest ratio over random instances."""
    ratios = [moser_harnack_ratio(*random_moser_harnack_instance(d, ell, rng)) for _ in range(trials)]
    return float(min(ratios))


class Drift(BaseModel):
    key: str
    baseline: float
    current: float
    relative: float


def regression_guard(current: Dict[str, float], baseline: Dict[str, float], tolerance: float = 0.2) -> List[Drift]:
    """Measured constants drifting more than `tolerance` (relative) from the baseline."""
    drifts = []
    for key, base in baseline.items():
        if key not in current:
            continue
        relative = abs(current[key] - base) / abs(base) if base else abs(current[key])
        if relative > tolerance:
            drifts.append(Drift(key=key, baseline=base, current=current[key], relative=relative))
    return drifts
