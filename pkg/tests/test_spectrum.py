import numpy as np
import pytest

from app.exceptions import DimensionMismatchError, ParityError
from app.lattice import Torus
from app.operator import assemble
from app.potentials import UniformDistribution, constant_potential, explicit_potential, sample_anderson, site_stream
from app.spectrum import (
    CountingCurve,
    count_leq,
    count_lt,
    counts,
    dual_identity_check,
    dual_spectrum_deviation,
    ids_curve,
    spectrum,
)

SQUARE = Torus(d=2, K=6)
H = assemble(SQUARE, sample_anderson(SQUARE, UniformDistribution(low=0.0, high=6.0), seed=31))


def test_spectrum_lies_in_the_band():
    spec = spectrum(H)
    assert len(spec.eigenvalues) == 36
    report = spec.check(H)
    assert report["below_zero"] == 0.0
    assert report["above_top"] == 0.0
    assert report["trace_error"] <= 1e-12


def test_inertia_counts_agree_with_the_eigendecomposition():
    eigenvalues = spectrum(H).eigenvalues
    # levels midway between consecutive eigenvalues, away from ties
    levels = list((eigenvalues[:-1:5] + eigenvalues[1::5]) / 2)
    assert counts(H, levels, method="inertia") == counts(H, levels, method="dense")
    assert counts(H, levels, strict=True, method="inertia") == counts(H, levels, strict=True, method="dense")


def test_ties_are_counted_on_the_right_side():
    # −Δ + 1 on Z/6Z has eigenvalues 1, 2, 2, 4, 4, 5
    t = Torus(d=1, K=6)
    H1 = assemble(t, constant_potential(t, 1.0))
    assert count_leq(H1, 2.0, method="dense") == 3
    assert count_lt(H1, 2.0, method="dense") == 1
    assert count_leq(H1, 5.0, method="dense") == 6
    assert count_lt(H1, 1.0, method="dense") == 0
    assert count_leq(H1, 3.0, method="inertia") == 3
    assert count_leq(H1, 4.5, method="inertia") == 5


def test_ids_curve_is_monotone_and_normalised():
    grid = np.linspace(0.05, H.spectral_top, 40)
    curve = ids_curve(H, grid)
    assert curve.kind == "N"
    assert curve.is_monotone()
    assert curve.values[-1] == 1.0
    assert curve.metadata["seed"] == 31
    strict = ids_curve(H, grid, strict=True)
    assert np.all(strict.values <= curve.values)


def test_ids_curve_needs_a_sorted_grid():
    with pytest.raises(DimensionMismatchError):
        ids_curve(H, [1.0, 0.5])


def test_dual_identity_holds_exactly():
    grid = np.linspace(0.1, H.spectral_top - 0.1, 25)
    assert dual_identity_check(H, grid) == 0
    assert dual_identity_check(H, grid, method="inertia") == 0
    assert dual_spectrum_deviation(H) <= 1e-9


def test_dual_identity_needs_even_side():
    t = Torus(d=1, K=7)
    H_odd = assemble(t, sample_anderson(t, UniformDistribution(), seed=1))
    with pytest.raises(ParityError):
        dual_identity_check(H_odd, [1.0])
    with pytest.raises(ParityError):
        dual_spectrum_deviation(H_odd)


def test_counting_curve_csv(tmp_path):
    curve = ids_curve(H, [0.5, 1.0, 2.0])
    path = tmp_path / "ids.csv"
    curve.write(path, header="# config_hash: abc\n")
    restored = CountingCurve.read(path)
    assert restored.kind == "N"
    np.testing.assert_array_equal(restored.values, curve.values)
    with pytest.raises(DimensionMismatchError):
        CountingCurve.from_csv("mu,N\n0.1,0.2\n")


@pytest.mark.parametrize("t", [Torus(d=1, K=24), Torus(d=2, K=6)])
def test_raising_the_potential_never_adds_eigenvalues(t):
    grid = np.linspace(0.1, 12.0, 30)
    for realization in range(20):
        V = sample_anderson(t, UniformDistribution(low=0.0, high=6.0), seed=41, realization=realization)
        rng = site_stream(42, realization)
        bump = rng.uniform(0.0, 2.0, t.shape) * (rng.random(t.shape) < 0.5)
        before = counts(assemble(t, V), grid)
        after = counts(assemble(t, explicit_potential(t, V.values + bump)), grid)
        assert all(a <= b for a, b in zip(after, before))


@pytest.mark.slow
def test_inertia_and_dense_counts_agree_on_random_instances():
    shapes = [(1, 64), (1, 256), (2, 10), (2, 20), (3, 6), (3, 8)]
    rng = site_stream(77)
    for realization in range(200):
        d, K = shapes[realization % len(shapes)]
        t = Torus(d=d, K=K)
        dist = UniformDistribution(low=0.0, high=float(rng.uniform(0.5, 20.0)))
        Hi = assemble(t, sample_anderson(t, dist, seed=78, realization=realization))
        levels = sorted(rng.uniform(0.0, Hi.spectral_top, 10))
        assert counts(Hi, levels, method="inertia") == counts(Hi, levels, method="dense")
        assert counts(Hi, levels, strict=True, method="inertia") == counts(Hi, levels, strict=True, method="dense")
