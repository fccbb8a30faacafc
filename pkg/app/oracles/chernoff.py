"""Chernoff–Hoeffding tail bound for sums of i.i.d. Bernoulli variables."""
import math
from itertools import product
from typing import Iterable, List, Tuple

import numpy as np
from pydantic import BaseModel

from app.exceptions import ParameterRangeError


def kl_divergence(x: float, y: float) -> float:
    """D(x‖y) between Bernoulli(x) and Bernoulli(y)."""
    if not (0 < x < 1 and 0 < y < 1):
        raise ParameterRangeError(f"D(x‖y) needs x, y in (0, 1), got x={x}, y={y}")
    return x * math.log(x / y) + (1 - x) * math.log((1 - x) / (1 - y))


def chernoff_bound(size: int, p: float, lam: float) -> float:
    """P{Σζ >= (1−λ)|B|} <= exp(−D(1−λ‖p)|B|)."""
    if size < 1:
        raise ParameterRangeError(f"|B| must be positive, got {size}")
    if not 0 < p < 1:
        raise ParameterRangeError(f"p must lie in (0, 1), got {p}")
    if not 0 < lam < 1 - p:
        raise ParameterRangeError(f"λ must lie in (0, 1−p) = (0, {1 - p}), got {lam}")
    return math.exp(-kl_divergence(1 - lam, p) * size)


class ChernoffTrial(BaseModel):
    size: int
    p: float
    lam: float
    bound: float
    frequency: float
    standard_error: float

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound + 3 * self.standard_error


def chernoff_trial(size: int, p: float, lam: float, trials: int, rng: np.random.Generator) -> ChernoffTrial:
    bound = chernoff_bound(size, p, lam)
    sums = rng.binomial(size, p, trials)
    frequency = float(np.mean(sums >= (1 - lam) * size))
    return ChernoffTrial(
        size=size,
        p=p,
        lam=lam,
        bound=bound,
        frequency=frequency,
        standard_error=math.sqrt(frequency * (1 - frequency) / trials),
    )


def default_grid() -> List[Tuple[int, float, float]]:
    """3×3×3 grid of (|B|, p, λ) with λ a fraction of the admissible range 1−p."""
    return [
        (size, p, (1 - p) * fraction)
        for size, p, fraction in product((10, 50, 100), (0.2, 0.5, 0.7), (0.25, 0.5, 0.75))
    ]


def chernoff_battery(
    rng: np.random.Generator,
    trials: int = 100_000,
    grid: Iterable[Tuple[int, float, float]] = None,
) -> List[ChernoffTrial]:
    return [chernoff_trial(size, p, lam, trials, rng) for size, p, lam in (grid or default_grid())]
