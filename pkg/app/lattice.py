"""
Torus geometry: sites, neighbors, cubes with their derived sets, partitions
P(s) and their shifts, discrete gradients and cut-off functions.

Sites are 1-based coordinate tuples in {1..K}^d. Fields are numpy arrays of
shape (K,)*d whose array index is the coordinate minus one; the canonical
linearisation is row-major (C order).
"""
from itertools import product
from typing import Iterator, List, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.exceptions import (
    DegenerateCubeError,
    DimensionMismatchError,
    InvalidDomainError,
    InvalidPartitionError,
    ScaleError,
)


Site = Tuple[int, ...]
ScalarField = np.ndarray


class Torus(BaseModel):
    """The index lattice (Z/KZ)^d."""

    model_config = ConfigDict(frozen=True)

    d: int
    K: int

    @model_validator(mode="after")
    def _check_domain(self) -> "Torus":
        if self.d < 1:
            raise InvalidDomainError(f"dimension must be positive, got d={self.d}")
        if self.K < 3:
            raise InvalidDomainError(f"side length must be at least 3, got K={self.K}")
        return self

    @property
    def volume(self) -> int:
        return self.K**self.d

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.K,) * self.d

    def normalize(self, site: Union[int, Sequence[int]]) -> Site:
        """Return the site as a tuple with every coordinate reduced into 1..K."""
        coords = (site,) if isinstance(site, (int, np.integer)) else tuple(site)
        if len(coords) != self.d:
            raise DimensionMismatchError(f"site {site} has {len(coords)} coordinates, torus has d={self.d}")
        return tuple((int(c) - 1) % self.K + 1 for c in coords)

    def index(self, site: Union[int, Sequence[int]]) -> int:
        """Row-major linear index (0-based) of a site."""
        coords = self.normalize(site)
        return int(np.ravel_multi_index(tuple(c - 1 for c in coords), self.shape))

    def site(self, index: int) -> Site:
        return tuple(int(c) + 1 for c in np.unravel_index(index, self.shape))

    def sites(self) -> Iterator[Site]:
        return (tuple(c) for c in product(range(1, self.K + 1), repeat=self.d))

    def neighbors(self, site: Union[int, Sequence[int]]) -> Set[Site]:
        """The 2d nearest neighbours of a site, with periodic wrap."""
        coords = self.normalize(site)
        result = set()
        for axis in range(self.d):
            for step in (1, -1):
                moved = list(coords)
                moved[axis] += step
                result.add(self.normalize(moved))
        return result

    def field(self, values) -> ScalarField:
        """Validate values as a scalar field, flat (canonical order) or shaped."""
        arr = np.asarray(values, dtype=float)
        if arr.size != self.volume:
            raise DimensionMismatchError(f"field has {arr.size} values, torus has {self.volume} sites")
        return arr.reshape(self.shape)

    def cube(self, anchor: Union[int, Sequence[int]], lengths: Union[int, Sequence[int]]) -> "Cube":
        if isinstance(lengths, (int, np.integer)):
            lengths = (int(lengths),) * self.d
        return Cube(anchor=self.normalize(anchor), lengths=tuple(int(x) for x in lengths), owner=self)


def make_torus(d: int, K: int) -> Torus:
    return Torus(d=d, K=K)


class Cube(BaseModel):
    """An axis-aligned box on the torus given by its lowest corner and extents."""

    model_config = ConfigDict(frozen=True)

    anchor: Site
    lengths: Tuple[int, ...]
    owner: Torus

    @model_validator(mode="after")
    def _check_shape(self) -> "Cube":
        if len(self.anchor) != self.owner.d or len(self.lengths) != self.owner.d:
            raise DimensionMismatchError("cube anchor/lengths do not match the torus dimension")
        if any(length < 1 for length in self.lengths):
            raise DegenerateCubeError(f"cube lengths must be positive, got {self.lengths}")
        if any(length > self.owner.K for length in self.lengths):
            raise ScaleError(f"cube lengths {self.lengths} exceed K={self.owner.K}")
        return self

    @property
    def is_regular(self) -> bool:
        return len(set(self.lengths)) == 1

    @property
    def side(self) -> int:
        """ℓ(Q); for irregular boxes the largest extent."""
        return max(self.lengths)

    @property
    def cardinality(self) -> int:
        return int(np.prod(self.lengths))

    def axis_indices(self) -> List[np.ndarray]:
        """Per-axis 0-based array indices covered by the cube, wrapped mod K."""
        K = self.owner.K
        return [(np.arange(length) + a - 1) % K for a, length in zip(self.anchor, self.lengths)]

    def linear_indices(self) -> np.ndarray:
        grids = np.meshgrid(*self.axis_indices(), indexing="ij")
        return np.ravel_multi_index(tuple(g.ravel() for g in grids), self.owner.shape)

    def restrict(self, field: ScalarField) -> np.ndarray:
        """Copy of the field on the cube, in local coordinates."""
        return np.asarray(field)[np.ix_(*self.axis_indices())]

    def contains(self, site: Union[int, Sequence[int]]) -> bool:
        coords = self.owner.normalize(site)
        K = self.owner.K
        return all((c - a) % K < length for c, a, length in zip(coords, self.anchor, self.lengths))

    def sites(self) -> Set[Site]:
        return {self._to_site(local) for local in product(*(range(n) for n in self.lengths))}

    def _to_site(self, local: Sequence[int]) -> Site:
        return self.owner.normalize([a + x for a, x in zip(self.anchor, local)])

    def tripled(self) -> "Cube":
        """3Q: the union of the 3^d translates Q + k, k_i ∈ {0, ±ℓ_i}."""
        if any(3 * length > self.owner.K for length in self.lengths):
            raise ScaleError(f"3Q of a cube with lengths {self.lengths} overlaps itself on K={self.owner.K}")
        anchor = [a - length for a, length in zip(self.anchor, self.lengths)]
        return self.owner.cube(anchor, [3 * length for length in self.lengths])

    def middle_third(self) -> "Cube":
        """Q/3 with I/3 = ⟦a+⌈r/3⌉, a+⌈r/3⌉+⌊r/3⌋−1⟧ on every axis."""
        if any(length < 3 for length in self.lengths):
            raise DegenerateCubeError(f"Q/3 needs every side at least 3, got {self.lengths}")
        anchor = [a + -(-length // 3) for a, length in zip(self.anchor, self.lengths)]
        return self.owner.cube(anchor, [length // 3 for length in self.lengths])

    def _exit_axes(self) -> np.ndarray:
        """Number of axes along which each local site has a neighbour outside Q."""
        count = np.zeros(self.lengths, dtype=int)
        for axis, length in enumerate(self.lengths):
            local = np.arange(length)
            exits = (local == 0) | (local == length - 1)
            shape = [1] * len(self.lengths)
            shape[axis] = length
            count += exits.reshape(shape).astype(int)
        return count

    def boundary(self) -> Set[Site]:
        """The inner boundary ∂Q."""
        return {self._to_site(local) for local in zip(*np.nonzero(self._exit_axes() >= 1))}

    def flat_boundary(self) -> Set[Site]:
        """∂°Q: boundary sites leaving Q along exactly one axis (corners removed)."""
        return {self._to_site(local) for local in zip(*np.nonzero(self._exit_axes() == 1))}


def cube_sets(cube: Cube) -> Tuple[Cube, Cube, Set[Site], Set[Site]]:
    """(3Q, Q/3, ∂Q, ∂°Q) of a cube."""
    return cube.tripled(), cube.middle_third(), cube.boundary(), cube.flat_boundary()


def axis_intervals(K: int, s: int) -> List[Tuple[int, int]]:
    """P_1(s) on {1..K}: q intervals of length s then the remainder r, as (start, length)."""
    q, r = divmod(K, s)
    intervals = [(1 + j * s, s) for j in range(q)]
    if r > 0:
        intervals.append((1 + q * s, r))
    return intervals


class Partition(BaseModel):
    """P(s) translated by a shift vector; a disjoint exact cover of the torus."""

    model_config = ConfigDict(frozen=True)

    torus: Torus
    side: int
    shift: Tuple[int, ...]

    @property
    def intervals(self) -> List[Tuple[int, int]]:
        return axis_intervals(self.torus.K, self.side)

    @property
    def counts(self) -> Tuple[int, ...]:
        return (len(self.intervals),) * self.torus.d

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def boxes(self) -> List[Cube]:
        intervals = self.intervals
        result = []
        for combo in product(intervals, repeat=self.torus.d):
            anchor = [start + a for (start, _), a in zip(combo, self.shift)]
            result.append(self.torus.cube(anchor, [length for _, length in combo]))
        return result

    def box_minima(self, field: ScalarField) -> np.ndarray:
        """Minimum of the field on every box, array of shape `counts`."""
        arr = np.asarray(field, dtype=float).reshape(self.torus.shape)
        # the box a + Q of the shifted partition reads field[x + a] at local x
        arr = np.roll(arr, shift=[-a for a in self.shift], axis=tuple(range(self.torus.d)))
        starts = np.array([start - 1 for start, _ in self.intervals])
        for axis in range(self.torus.d):
            arr = np.minimum.reduceat(arr, starts, axis=axis)
        return arr

    def multiplicity(self) -> np.ndarray:
        """How many boxes cover each site (all ones for a partition)."""
        counts = np.zeros(self.torus.volume, dtype=int)
        for box in self.boxes:
            np.add.at(counts, box.linear_indices(), 1)
        return counts.reshape(self.torus.shape)


def partition(t: Torus, s: int, shift: Union[int, Sequence[int]] = 0) -> Partition:
    if s < 1 or s > t.K:
        raise InvalidPartitionError(f"partition side must satisfy 1 <= s <= K={t.K}, got s={s}")
    if isinstance(shift, (int, np.integer)):
        shift = (int(shift),) * t.d
    shift = tuple(int(a) for a in shift)
    if len(shift) != t.d:
        raise InvalidPartitionError(f"shift {shift} does not have d={t.d} components")
    if any(a < 0 or a > s - 1 for a in shift):
        raise InvalidPartitionError(f"shift components must lie in [0, {s - 1}], got {shift}")
    return Partition(torus=t, side=s, shift=shift)


def cutoff(cube: Cube) -> ScalarField:
    """The discrete cut-off χ^Q on the torus: 1 on Q/3, linear shells of slope 3/R, 0 off 3(Q/3)."""
    if not cube.is_regular:
        raise DegenerateCubeError(f"cut-off needs a regular cube, got lengths {cube.lengths}")
    R = cube.side
    if R < 3:
        raise DegenerateCubeError(f"cut-off needs R >= 3, got R={R}")
    j_max = R // 3
    start = -(-R // 3)
    local = np.arange(R)
    # sup-distance from the middle third along one axis
    axis_dist = np.maximum(0, np.maximum(start - local, local - (start + j_max - 1)))
    dist = np.zeros((R,) * cube.owner.d, dtype=int)
    for axis in range(cube.owner.d):
        shape = [1] * cube.owner.d
        shape[axis] = R
        dist = np.maximum(dist, axis_dist.reshape(shape))
    local_chi = np.where(dist <= j_max, 1.0 - (3.0 / R) * dist, 0.0)

    chi = np.zeros(cube.owner.shape)
    chi[np.ix_(*cube.axis_indices())] = local_chi
    return chi


def gradient(t: Torus, f: ScalarField) -> np.ndarray:
    """Forward differences ∇_i f_n = f_{n+e_i} − f_n, shape (d, K, ..., K)."""
    arr = t.field(f)
    return np.stack([np.roll(arr, -1, axis=axis) - arr for axis in range(t.d)])


def gradient_norm_sq(t: Torus, f: ScalarField) -> np.ndarray:
    """‖∇f_n‖² per site."""
    return np.sum(gradient(t, f) ** 2, axis=0)
