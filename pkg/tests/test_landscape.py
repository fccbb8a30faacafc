import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.exceptions import IncompatiblePeriodError, InvalidPotentialError, ScaleError, SingularOperatorError
from app.landscape import (
    LandscapeField,
    landscape_floor_margin,
    periodic_cell_landscape,
    periodic_extension,
    scaling_audit,
    scaling_constant,
    solve_landscape,
    uncertainty_residual,
    uncertainty_tolerance,
)
from app.lattice import Torus
from app.operator import apply, assemble
from app.potentials import (
    UniformDistribution,
    constant_potential,
    explicit_potential,
    periodic_potential,
    sample_anderson,
    site_stream,
)

RING = Torus(d=1, K=24)
H_RING = assemble(RING, sample_anderson(RING, UniformDistribution(low=0.0, high=4.0), seed=21))
L_RING = solve_landscape(H_RING)

CELL = [1.0, 3.0, 2.0, 5.0]


def test_solution_satisfies_the_equation(anderson_2d):
    L = solve_landscape(anderson_2d)
    assert L.method == "direct"
    assert L.residual_norm <= 1e-10
    np.testing.assert_allclose(apply(anderson_2d, L.u), 1.0, atol=1e-10)
    assert np.all(L.u > 0)


def test_landscape_floor(anderson_1d, anderson_2d):
    for H in (anderson_1d, anderson_2d):
        assert landscape_floor_margin(H, solve_landscape(H)) >= -1e-9


def test_conjugate_gradient_agrees_with_direct():
    t = Torus(d=2, K=30)
    H = assemble(t, sample_anderson(t, UniformDistribution(low=0.0, high=4.0), seed=4))
    direct = solve_landscape(H, method="direct")
    iterative = solve_landscape(H, method="cg")
    assert iterative.method == "cg"
    np.testing.assert_allclose(iterative.u, direct.u, rtol=1e-8)


@pytest.mark.parametrize("t", [Torus(d=1, K=24), Torus(d=2, K=8)])
def test_larger_potential_gives_a_smaller_landscape(t):
    for realization in range(20):
        V = sample_anderson(t, UniformDistribution(low=0.0, high=4.0), seed=51, realization=realization)
        raised = V.values + site_stream(52, realization).uniform(0.0, 3.0, t.shape)
        u = solve_landscape(assemble(t, V)).u
        u_raised = solve_landscape(assemble(t, explicit_potential(t, raised))).u
        assert np.all(u_raised <= u + 1e-9)


def test_zero_potential_is_singular(ring):
    with pytest.raises(SingularOperatorError):
        solve_landscape(assemble(ring, constant_potential(ring, 0.0)))


def test_constant_potential_is_gated(ring):
    H = assemble(ring, constant_potential(ring, 2.0))
    with pytest.raises(InvalidPotentialError):
        solve_landscape(H)
    np.testing.assert_allclose(solve_landscape(H, allow_constant=True).u, 0.5, rtol=1e-12)


@seed(1)
@given(f=arrays(np.float64, RING.shape, elements=st.floats(min_value=-50, max_value=50)))
def test_uncertainty_identity(f):
    assert uncertainty_residual(H_RING, L_RING, f) <= uncertainty_tolerance(H_RING, f)


def test_periodic_cell_landscape_matches_the_full_solve():
    t = Torus(d=1, K=24)
    V = periodic_potential(t, CELL)
    cell = periodic_cell_landscape(V, 4)
    assert cell.torus.K == 4
    full = solve_landscape(assemble(t, V))
    np.testing.assert_allclose(periodic_extension(cell, t), full.u, rtol=1e-10)


def test_periodic_cell_requirements():
    t = Torus(d=1, K=24)
    V = periodic_potential(t, CELL)
    with pytest.raises(IncompatiblePeriodError):
        periodic_cell_landscape(V, 5)
    with pytest.raises(IncompatiblePeriodError):
        periodic_cell_landscape(V, 2)
    with pytest.raises(IncompatiblePeriodError):
        periodic_cell_landscape(V, 3)


def test_scaling_audit_is_size_independent_for_periodic_potentials():
    audits = []
    for K in (24, 48, 96):
        t = Torus(d=1, K=K)
        audits.append(scaling_audit(solve_landscape(assemble(t, periodic_potential(t, CELL))), [1, 2, 4, 8]))
    for ell in (1, 2, 4, 8):
        values = [audit[ell] for audit in audits]
        assert values == pytest.approx([values[0]] * 3, rel=1e-8)
        assert np.isfinite(values[0]) and values[0] > 0


def test_scaling_constant_needs_room_for_the_tripled_box():
    with pytest.raises(ScaleError):
        scaling_constant(L_RING, 9)


def test_landscape_file(tmp_path):
    path = tmp_path / "landscape.txt"
    L_RING.write(path, header="# run: test\n")
    text = path.read_text()
    assert "# solver: direct" in text
    restored = LandscapeField.read(path)
    assert restored.torus == RING
    np.testing.assert_array_equal(restored.u, L_RING.u)
