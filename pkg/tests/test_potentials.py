import numpy as np
import pytest
from pydantic import ValidationError

from app.exceptions import (
    DimensionMismatchError,
    IncompatiblePeriodError,
    InvalidPotentialError,
    ParameterRangeError,
)
from app.lattice import Torus
from app.potentials import (
    BernoulliDistribution,
    DiscreteDistribution,
    PotentialField,
    UniformDistribution,
    cdf_eval,
    constant_potential,
    dual_potential,
    explicit_potential,
    periodic_potential,
    require_theorem_conformant,
    sample_anderson,
    site_stream,
)


def test_streams_are_reproducible_and_independent():
    a = site_stream(42, 3).random(8)
    b = site_stream(42, 3).random(8)
    c = site_stream(42, 4).random(8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seed_range():
    with pytest.raises(ParameterRangeError):
        site_stream(-1)
    with pytest.raises(ParameterRangeError):
        site_stream(2**64)


def test_anderson_draw_respects_support():
    t = Torus(d=2, K=10)
    V = sample_anderson(t, UniformDistribution(low=0.0, high=3.0), seed=1, realization=2)
    assert V.values.shape == (10, 10)
    assert 0.0 <= V.values.min() and V.values.max() <= 3.0
    assert V.reference_vmax == 3.0
    assert V.seed == 1
    assert not V.values.flags.writeable


def test_bernoulli_draw_takes_two_values():
    t = Torus(d=1, K=200)
    V = sample_anderson(t, BernoulliDistribution(p=0.3, height=2.0), seed=8)
    assert set(np.unique(V.values)) <= {0.0, 2.0}
    assert 0 < np.count_nonzero(V.values) < 200


def test_distribution_validation():
    with pytest.raises(ValidationError):
        UniformDistribution(low=-1.0, high=1.0)
    with pytest.raises(ValidationError):
        UniformDistribution(low=2.0, high=1.0)
    with pytest.raises(ValidationError):
        BernoulliDistribution(p=1.5)
    with pytest.raises(ValidationError):
        DiscreteDistribution(atoms=((0.0, 0.5), (1.0, 0.4)))


def test_theorem_conformance():
    require_theorem_conformant(UniformDistribution(low=0.0, high=1.0))
    with pytest.raises(InvalidPotentialError):
        require_theorem_conformant(UniformDistribution(low=0.5, high=1.0))
    point_mass = BernoulliDistribution(p=1.0, height=2.0)
    with pytest.raises(InvalidPotentialError):
        require_theorem_conformant(point_mass)
    require_theorem_conformant(point_mass, allow_constant=True)


def test_cdf():
    dist = DiscreteDistribution(atoms=((0.0, 0.25), (1.0, 0.25), (3.0, 0.5)))
    assert cdf_eval(dist, -0.1) == 0.0
    assert cdf_eval(dist, 0.0) == 0.25
    assert cdf_eval(dist, 2.0) == 0.5
    assert cdf_eval(dist, 3.0) == 1.0
    assert cdf_eval(UniformDistribution(low=0.0, high=4.0), 1.0) == 0.25


def test_field_validation():
    t = Torus(d=1, K=4)
    with pytest.raises(InvalidPotentialError):
        explicit_potential(t, [1.0, -0.5, 0.0, 2.0])
    with pytest.raises(InvalidPotentialError):
        explicit_potential(t, [1.0, np.nan, 0.0, 2.0])
    with pytest.raises(DimensionMismatchError):
        explicit_potential(t, [1.0, 2.0])
    with pytest.raises(InvalidPotentialError):
        explicit_potential(t, [1.0, 2.0, 3.0, 4.0], reference_vmax=3.0)


def test_periodic_tiling():
    t = Torus(d=2, K=6)
    cell = np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]])
    V = periodic_potential(t, cell)
    np.testing.assert_array_equal(V.values[:2, :3], cell)
    np.testing.assert_array_equal(V.values[2:4, 3:6], cell)
    with pytest.raises(IncompatiblePeriodError):
        periodic_potential(Torus(d=1, K=10), [1.0, 2.0, 3.0])


def test_dual_potential_uses_reference_maximum():
    t = Torus(d=1, K=4)
    V = explicit_potential(t, [0.0, 1.0, 2.5, 1.0], reference_vmax=4.0)
    dual = dual_potential(V)
    np.testing.assert_array_equal(dual.values, [4.0, 3.0, 1.5, 3.0])
    assert dual.reference_vmax == 4.0


def test_flat_text_format(tmp_path):
    t = Torus(d=2, K=3)
    V = explicit_potential(t, np.arange(9, dtype=float) / 7.0)
    path = tmp_path / "v.txt"
    V.write(path, header="# written by a test\n")
    assert path.read_text().splitlines()[1] == "2 3"
    np.testing.assert_array_equal(PotentialField.read(path).values, V.values)


def test_constant_potential_flags():
    t = Torus(d=1, K=5)
    assert constant_potential(t, 2.0).is_constant
    assert constant_potential(t, 0.0).is_zero
    assert not explicit_potential(t, [0, 0, 1, 0, 0]).is_constant
