import math

import numpy as np
import pytest

from app.exceptions import DegenerateCubeError, KernelCapacityError, ParameterRangeError, PreconditionError
from app.landscape import solve_landscape
from app.oracles.chernoff import chernoff_battery, chernoff_bound, kl_divergence
from app.oracles.cube import CubeProblem, box_window, comparison_function, dirichlet_solve, make_box, torsion, torus_window
from app.oracles.harnack import (
    harnack_check,
    moser_harnack_constant,
    moser_harnack_ratio,
    random_moser_harnack_instance,
    regression_guard,
)
from app.oracles.kernels import ibp_residual, ibp_tolerance, kernel_cache, kernels, shell_weights, surface_averages
from app.oracles.principles import (
    max_principle_check,
    poincare_check,
    random_subharmonic,
    random_subsolution,
    submean_check,
    torsion_comparison_check,
)
from app.potentials import site_stream


@pytest.fixture
def rng():
    return site_stream(2024)


class TestPrinciples:
    @pytest.mark.parametrize("lengths", [(7,), (5, 6), (4, 4, 4)])
    @pytest.mark.parametrize("with_potential", [False, True])
    def test_maximum_principle_on_random_subsolutions(self, rng, lengths, with_potential):
        box = make_box(lengths)
        for _ in range(10):
            V, f = random_subsolution(box, rng, with_potential=with_potential)
            result = max_principle_check(box, V, f)
            assert result.passed, result.witness

    def test_potential_lowers_the_floor_to_zero(self):
        box = make_box(3)
        f = np.array([1.0, 0.1, 1.0])
        result = max_principle_check(box, 100.0, f)
        assert result.passed
        assert result.lhs == 0.0 and result.rhs == pytest.approx(0.1)
        with pytest.raises(PreconditionError):
            max_principle_check(box, 0.0, f)

    def test_poincare(self, rng):
        for lengths in [(1,), (9,), (4, 7), (3, 3, 5)]:
            box = make_box(lengths)
            assert poincare_check(box, rng.normal(size=box.shape)).passed
            assert poincare_check(box, np.full(box.shape, 3.0)).lhs == pytest.approx(0.0)

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("r", [1, 2, 4])
    def test_torsion_below_the_comparison_function(self, d, r):
        assert torsion_comparison_check(d, r).passed

    def test_torsion_solves_the_dirichlet_problem(self):
        problem = CubeProblem(d=2, r=3)
        w = torsion(problem)
        np.testing.assert_allclose(problem.box.neg_laplacian(w), 1.0, atol=1e-12)
        assert np.all(w[problem.box.boundary_mask()] == 0.0)
        assert comparison_function(3, 2)[problem.center] == 4.5

    def test_submean_value(self, rng):
        for d, r in [(1, 6), (2, 4), (3, 2)]:
            problem = CubeProblem(d=d, r=r)
            f = random_subharmonic(problem, rng)
            report = submean_check(problem, f)
            assert report.passed
            assert report.boundary_ratio >= 0 and report.volume_ratio >= 0

    def test_submean_needs_nonnegative_subharmonic_data(self):
        problem = CubeProblem(d=1, r=2)
        with pytest.raises(PreconditionError):
            submean_check(problem, np.array([1.0, 0.0, -1.0, 0.0, 1.0]))
        with pytest.raises(PreconditionError):
            submean_check(problem, np.array([0.0, 0.0, 1.0, 0.0, 0.0]))


class TestKernels:
    @pytest.mark.parametrize("d,r", [(1, 12), (2, 5), (3, 3)])
    def test_kernel_identities(self, d, r):
        kern = kernels(CubeProblem(d=d, r=r))
        assert kern.normalization_error() <= 1e-12
        assert kern.path_agreement() <= 1e-11
        poles = [(1,) * d, (r,) * d, (2 * r - 1,) + (1,) * (d - 1)]
        block = kern.green_block(poles)
        np.testing.assert_allclose(block, block.T, atol=1e-12)
        assert np.all(block > 0)

    def test_kernel_guards(self):
        with pytest.raises(DegenerateCubeError):
            kernels(CubeProblem(d=1, r=0))
        with pytest.raises(KernelCapacityError):
            kernels(CubeProblem(d=3, r=9))
        with pytest.raises(KernelCapacityError):
            kernels(CubeProblem(d=4, r=1))

    def test_integration_by_parts(self, rng):
        for d, r in [(1, 9), (2, 4), (3, 2)]:
            problem = CubeProblem(d=d, r=r)
            u = rng.normal(0.0, 5.0, problem.shape)
            assert ibp_residual(problem, kernels(problem), u) <= ibp_tolerance(u)

    def test_surface_averages_of_a_landscape(self, anderson_1d, anderson_2d):
        for H, r in ((anderson_1d, 6), (anderson_2d, 3)):
            L = solve_landscape(H)
            u = torus_window(H.torus, L.u, (2,) * H.torus.d, r)
            averages = surface_averages(CubeProblem(d=H.torus.d, r=r), u)
            assert averages.a[0] == u[(r,) * H.torus.d]
            assert averages.min_margin >= -1e-10 * (1.0 + float(np.max(u)))
            assert len(averages.A) == r + 1

    @pytest.mark.parametrize("d,r", [(1, 6), (2, 4), (3, 2)])
    def test_shell_weights_sum_to_the_shell_sizes(self, d, r):
        problem = CubeProblem(d=d, r=r)
        radius = problem.radius().ravel()
        sums = np.bincount(radius, weights=shell_weights(problem).ravel())
        np.testing.assert_allclose(sums, np.bincount(radius), rtol=1e-12)
        averages = surface_averages(problem, np.full(problem.shape, 2.5))
        np.testing.assert_allclose(averages.a, 2.5, rtol=1e-12)
        np.testing.assert_allclose(averages.A, 2.5, rtol=1e-12)

    def test_kernel_cache_can_be_emptied(self):
        problem = CubeProblem(d=1, r=4)
        first = kernels(problem)
        assert kernels(problem) is first
        kernel_cache.clear()
        assert len(kernel_cache) == 0
        assert kernels(problem) is not first
        assert len(kernel_cache) == 1


class TestHarnack:
    def test_landscape_windows(self, anderson_1d, anderson_2d):
        for H in (anderson_1d, anderson_2d):
            t = H.torus
            L = solve_landscape(H)
            for ell in (1, 3, 5):
                lengths = [ell + 2] * t.d
                box = make_box(lengths)
                f = box_window(t, L.u, (3,) * t.d, lengths)
                V = box_window(t, H.potential.values, (3,) * t.d, lengths)[box.interior]
                assert harnack_check(box, V, f).passed

    def test_harnack_preconditions(self):
        box = make_box(4)
        with pytest.raises(PreconditionError):
            harnack_check(box, 0.0, np.array([1.0, -1.0, 1.0, 1.0]))
        with pytest.raises(PreconditionError):
            harnack_check(box, 0.0, np.array([0.0, 2.0, 0.0, 0.0]))

    def test_moser_harnack_ratio(self, rng):
        domain, g = random_moser_harnack_instance(2, 3, rng)
        assert domain.shape == (11, 11)
        ratio = moser_harnack_ratio(domain, g)
        assert 0 < ratio < math.inf
        assert moser_harnack_constant(2, 3, 3, rng) > 0

    def test_moser_harnack_constant_is_stable_across_scales(self):
        values = [moser_harnack_constant(2, ell, 20, site_stream(7, ell)) for ell in (3, 6, 9)]
        assert min(values) > 0
        assert max(values) / min(values) <= 2.0

    def test_moser_harnack_needs_bounded_curvature(self):
        domain = make_box(5)
        g = np.zeros(5)
        g[2] = 10.0
        with pytest.raises(PreconditionError):
            moser_harnack_ratio(domain, g)

    def test_regression_guard(self):
        baseline = {"a": 1.0, "b": 2.0, "c": 5.0}
        drifts = regression_guard({"a": 1.1, "b": 2.6}, baseline)
        assert [d.key for d in drifts] == ["b"]
        assert drifts[0].relative == pytest.approx(0.3)


class TestChernoff:
    def test_divergence(self):
        assert kl_divergence(0.3, 0.3) == 0.0
        assert kl_divergence(0.9, 0.3) > 0
        with pytest.raises(ParameterRangeError):
            kl_divergence(1.0, 0.5)

    def test_bound_range(self):
        assert 0 < chernoff_bound(50, 0.5, 0.25) < 1
        with pytest.raises(ParameterRangeError):
            chernoff_bound(50, 0.5, 0.6)
        with pytest.raises(ParameterRangeError):
            chernoff_bound(0, 0.5, 0.1)

    def test_battery(self, rng):
        results = chernoff_battery(rng, trials=20_000)
        assert len(results) == 27
        assert all(trial.passed for trial in results)


def test_dirichlet_solve_with_potential():
    box = make_box((6, 5))
    u = dirichlet_solve(box, 1.0, 2.0, V=3.0)
    np.testing.assert_allclose(box.neg_laplacian(u) + 3.0 * u[box.interior], 1.0, atol=1e-12)
    assert np.all(u[box.boundary_mask()] == 2.0)
