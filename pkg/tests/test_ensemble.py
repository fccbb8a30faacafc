import numpy as np
import pytest

from app.ensemble import EnsembleConfig, EnsembleResult, default_grid, run_ensemble, tail_fit, tail_window
from app.exceptions import InvalidPotentialError, ParityError, ScaleError, WindowError
from app.lattice import Torus

GRID = list(np.logspace(-2, np.log10(8.0), 30))


def small_config(**overrides) -> EnsembleConfig:
    fields = dict(
        d=1,
        K=16,
        distribution={"kind": "uniform", "low": 0.0, "high": 4.0},
        realizations=6,
        master_seed=7,
        grid=GRID,
    )
    fields.update(overrides)
    return EnsembleConfig(**fields)


def test_means_do_not_depend_on_the_worker_count():
    cfg = small_config(outputs={"N", "N_u", "Nu_dual"})
    serial = run_ensemble(cfg, workers=1)
    pooled = run_ensemble(cfg, workers=4)
    for name in ("N", "N_u", "Nu_dual"):
        np.testing.assert_array_equal(serial.means[name], pooled.means[name])
        np.testing.assert_array_equal(serial.standard_errors[name], pooled.standard_errors[name])


def test_upper_law_across_realizations():
    result = run_ensemble(small_config(), workers=2, keep_realizations=True)
    assert result.upper_violations == 0
    assert [r.index for r in result.realizations] == list(range(6))
    assert np.all(np.diff(result.means["N"]) >= 0)


def test_csv_and_metadata():
    result = run_ensemble(small_config(), workers=1)
    header = result.to_csv().splitlines()[0]
    assert header == "mu,mean_N,se_N,mean_Nu,se_Nu"
    meta = result.metadata()
    assert meta["master_seed"] == 7 and meta["realizations"] == 6
    assert meta["config"]["outputs"] == ["N", "N_u"]
    assert result.seeds() == (7, 6)


def test_config_gates():
    with pytest.raises(InvalidPotentialError):
        run_ensemble(small_config(distribution={"kind": "bernoulli", "p": 1.0, "height": 1.0}))
    with pytest.raises(ParityError):
        run_ensemble(small_config(K=15, outputs={"Nu_dual"}))
    with pytest.raises(ScaleError):
        run_ensemble(small_config(grid=[1e-4, 1.0]))


def test_default_grid_is_clipped_to_the_scale_floor():
    grid = default_grid(Torus(d=1, K=10), 8.0, points=20)
    assert grid[0] == pytest.approx(0.01)
    assert grid[-1] == pytest.approx(8.0)
    assert len(grid) == 20


def test_tail_window():
    cfg = small_config(k_star=2.0)
    assert tail_window(cfg, 0.5) == (pytest.approx(0.01), 0.5)
    assert tail_window(small_config(k_star=4.0, grid=[]), 0.5)[0] == pytest.approx(4.0 / 256)
    with pytest.raises(WindowError):
        tail_window(cfg, 1e-3)


def synthetic_tail(mu: np.ndarray, values: np.ndarray) -> EnsembleResult:
    return EnsembleResult(
        config=small_config(grid=list(mu)),
        grid=mu,
        means={"N": values},
        standard_errors={"N": np.zeros_like(mu)},
    )


def test_tail_fit_skips_points_outside_the_log_domain():
    mu = np.logspace(-3, -1, 20)
    values = np.exp(-(mu**-0.5))
    values[:3] = 0.0
    result = synthetic_tail(mu, values)
    fit = tail_fit(result, (1e-3, 1e-1))
    assert fit.slope == pytest.approx(-0.5, abs=1e-9)
    assert len(fit.excluded) == 3


def test_tail_fit_refuses_a_window_with_too_few_points():
    mu = np.geomspace(0.02, 0.2, 20)
    values = np.exp(-(mu**-0.5))
    values[:17] = 0.0
    with pytest.raises(WindowError, match="only 3 of 20"):
        tail_fit(synthetic_tail(mu, values), (0.02, 0.2))


def test_tail_fit_refuses_points_bunched_at_one_end():
    mu = np.logspace(-3, -1, 40)
    values = np.exp(-(mu**-0.5))
    values[:30] = 0.0
    with pytest.raises(WindowError, match="log-width"):
        tail_fit(synthetic_tail(mu, values), (1e-3, 1e-1))


@pytest.mark.slow
@pytest.mark.parametrize("d,K,realizations", [(1, 120, 20), (2, 20, 5)])
def test_upper_law_on_the_default_grid(d, K, realizations):
    cfg = EnsembleConfig(
        d=d,
        K=K,
        distribution={"kind": "uniform", "low": 0.0, "high": 8.0},
        realizations=realizations,
        master_seed=2024,
    )
    result = run_ensemble(cfg, workers=4)
    assert len(result.grid) == 200
    assert result.upper_violations == 0


@pytest.mark.slow
def test_uniform_tail_has_no_data_in_the_low_window():
    # EN is still 0 over most of [0.02, 0.2] at this size
    cfg = EnsembleConfig(
        d=1,
        K=2000,
        distribution={"kind": "uniform", "low": 0.0, "high": 1.0},
        realizations=50,
        master_seed=0,
        grid=list(np.geomspace(0.02, 0.2, 20)),
        outputs={"N"},
    )
    result = run_ensemble(cfg, workers=4)
    assert result.means["N"][0] == 0.0
    with pytest.raises(WindowError):
        tail_fit(result, (0.02, 0.2))


@pytest.mark.slow
def test_lifschitz_slope_of_a_bernoulli_tail():
    cfg = EnsembleConfig(
        d=1,
        K=2000,
        distribution={"kind": "bernoulli", "p": 0.5, "height": 10.0},
        realizations=100,
        master_seed=0,
        grid=list(np.geomspace(0.1, 1.0, 20)),
        outputs={"N"},
    )
    result = run_ensemble(cfg, workers=4)
    fit = tail_fit(result, (0.1, 1.0))
    assert fit.excluded == []
    assert -0.9 <= fit.slope <= -0.3
