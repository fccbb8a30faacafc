import numpy as np
import pytest
from hypothesis import given, seed
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from app.exceptions import ParityError, TorusMismatchError
from app.lattice import Torus
from app.operator import apply, assemble, dual_vector, periodic_laplacian, quadratic_form, sign_pattern
from app.potentials import UniformDistribution, explicit_potential, sample_anderson

TORUS = Torus(d=2, K=6)
H = assemble(TORUS, sample_anderson(TORUS, UniformDistribution(low=0.0, high=5.0), seed=3))

fields = arrays(np.float64, TORUS.shape, elements=st.floats(min_value=-100, max_value=100))


@pytest.mark.parametrize("d,K", [(1, 5), (2, 4), (3, 3)])
def test_laplacian_is_symmetric_with_zero_row_sums(d, K):
    lap = periodic_laplacian(Torus(d=d, K=K))
    np.testing.assert_array_equal(lap.toarray(), lap.T.toarray())
    np.testing.assert_allclose(np.asarray(lap.sum(axis=1)).ravel(), 0.0)
    np.testing.assert_array_equal(lap.diagonal(), 2.0 * d)


@seed(1)
@given(phi=fields)
def test_stencil_matches_matrix(phi):
    np.testing.assert_allclose(apply(H, phi).ravel(), H.matrix @ phi.ravel(), rtol=1e-12, atol=1e-9)


@seed(2)
@given(f=fields)
def test_quadratic_form_is_energy(f):
    flat = f.ravel()
    expected = float(flat @ (H.matrix @ flat))
    assert quadratic_form(H, f) == pytest.approx(expected, rel=1e-10, abs=1e-8)
    assert quadratic_form(H, f) >= 0.0


@seed(3)
@given(phi=fields)
def test_sign_flip_maps_operator_onto_its_dual(phi):
    dual = H.dual()
    lhs = apply(dual, dual_vector(TORUS, phi))
    rhs = dual_vector(TORUS, H.spectral_top * phi - apply(H, phi))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


def test_sign_pattern_needs_even_side():
    with pytest.raises(ParityError):
        sign_pattern(Torus(d=1, K=5))
    pattern = sign_pattern(Torus(d=2, K=4))
    assert pattern[0, 0] == 1.0 and pattern[0, 1] == -1.0


def test_assemble_checks_torus():
    V = explicit_potential(Torus(d=1, K=4), [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(TorusMismatchError):
        assemble(Torus(d=1, K=5), V)


def test_dual_shares_the_spectral_top():
    assert H.dual().spectral_top == H.spectral_top
    assert H.spectral_top == 8.0 + 5.0
