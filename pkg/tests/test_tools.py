import json

import numpy as np
import pytest

from app.flow.base import StepStatus
from app.landscape import LandscapeField
from app.schema import Figure4Params, RunConfig
from app.tool import default_tools
from app.tool.figure4 import reproduce

POTENTIAL = {"d": 1, "K": 16, "distribution": {"kind": "uniform", "low": 0.0, "high": 4.0}, "seed": 3}
GRID = {"points": 25, "mu_min": 0.05, "mu_max": 8.0}


async def run_verb(name, run):
    return await default_tools().execute(name=name, run=run)


async def test_solve_writes_landscape_and_potential(make_run, tmp_path):
    result = await run_verb("solve", make_run(solve={"potential": POTENTIAL}))
    assert result.exit_code == 0, result.error
    assert result.checks == {"landscape_floor": True}
    text = (tmp_path / "landscape.txt").read_text()
    assert text.startswith("# version: ")
    assert "# seeds: 3:0" in text
    assert "# solver: direct" in text
    assert LandscapeField.read(tmp_path / "landscape.txt").u.shape == (16,)
    assert (tmp_path / "potential.txt").exists()


async def test_ids_curve_csv(make_run, tmp_path):
    result = await run_verb("ids", make_run(ids={"potential": POTENTIAL, "grid": GRID}))
    assert result.exit_code == 0
    rows = [line for line in (tmp_path / "ids.csv").read_text().splitlines() if not line.startswith("#")]
    assert rows[0] == "mu,value,kind"
    assert len(rows) == 26
    assert not (tmp_path / "ids_plot.py").exists()


async def test_plot_script_is_rendered_on_request(tmp_path):
    run = RunConfig(output_dir=tmp_path, ids={"potential": POTENTIAL, "grid": GRID})
    result = await run_verb("ids", run)
    script = (tmp_path / "ids_plot.py").read_text()
    assert tmp_path / "ids_plot.py" in result.artifacts
    assert '"ids.csv"' in script and "matplotlib" in script


async def test_boxcount_from_a_landscape_file(make_run, tmp_path):
    await run_verb("solve", make_run(solve={"potential": POTENTIAL}))
    result = await run_verb("boxcount", make_run(boxcount={"landscape": str(tmp_path / "landscape.txt"), "grid": GRID}))
    assert result.exit_code == 0, result.error
    assert (tmp_path / "nu.csv").exists()


async def test_compare_from_a_potential(make_run, tmp_path):
    result = await run_verb("compare", make_run(compare={"potential": POTENTIAL, "grid": GRID}))
    assert result.exit_code == 0, result.error
    assert result.checks == {"upper_law": True}
    header = (tmp_path / "compare.csv").read_text()
    assert "# fit_c1: " in header and "# fit_c2: " in header


async def test_compare_flags_a_forged_curve(make_run, tmp_path, heavy_potential):
    potential_file = tmp_path / "heavy.txt"
    heavy_potential.write(potential_file)
    await run_verb("solve", make_run(solve={"potential": {"file": str(potential_file)}}))
    forged = tmp_path / "forged.csv"
    forged.write_text("mu,value,kind\n" + "".join(f"{mu},0.5,N\n" for mu in (0.1, 0.2, 0.3, 0.4, 0.5)))

    result = await run_verb(
        "compare",
        make_run(compare={"n_curve": str(forged), "landscape": str(tmp_path / "landscape.txt"), "fit": False}),
    )
    assert result.exit_code == 1
    assert result.checks == {"upper_law": False}
    assert [row["mu"] for row in result.failures] == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert all(row["N_u_4d_mu"] == 0.0 for row in result.failures)


async def test_dual_run(make_run, tmp_path):
    result = await run_verb("dual", make_run(dual={"potential": POTENTIAL, "grid": GRID}))
    assert result.exit_code == 0, result.output
    assert result.checks == {"dual_identity": True, "dual_law": True, "dual_spectrum": True}
    header = [line for line in (tmp_path / "dual.csv").read_text().splitlines() if not line.startswith("#")][0]
    assert header == "mu,N,one_minus_Nstrict_dual,Nu_dual"
    assert (tmp_path / "dual_law.csv").exists()


async def test_dual_needs_an_even_side(make_run):
    result = await run_verb("dual", make_run(dual={"potential": {**POTENTIAL, "K": 15}, "grid": GRID}))
    assert result.exit_code == 2
    assert "ParityError" in result.error


async def test_ensemble_with_tail_fit(make_run, tmp_path):
    section = {
        "d": 1,
        "K": 16,
        "distribution": {"kind": "uniform", "low": 0.0, "high": 4.0},
        "realizations": 4,
        "master_seed": 5,
        "grid": list(np.logspace(-2, np.log10(8.0), 60)),
        "window": [2.5, 5.0],
    }
    result = await run_verb("ensemble", make_run(ensemble=section, workers=2))
    assert result.exit_code == 0, result.error
    meta = json.loads((tmp_path / "ensemble.csv.meta.json").read_text())
    assert meta["master_seed"] == 5
    assert meta["tail_fit"]["window"] == [2.5, 5.0]
    assert meta["seeds"] == "5:0..3"


async def test_verify_records_then_compares_a_baseline(make_run, tmp_path):
    section = {"seed": 3, "trials": 2, "mc_trials": 200, "moser_trials": 1, "moser_scales": [3]}
    first = await run_verb("verify", make_run(verify=section))
    assert first.exit_code == 0, first.failures
    assert (tmp_path / "oracle_baseline.json").exists()
    assert set(first.checks) >= {"max_principle", "harnack", "chernoff", "moser_harnack"}
    assert all(first.checks.values())
    assert "step,kind,status" in (tmp_path / "verify.csv").read_text()

    second = await run_verb("verify", make_run(verify=section))
    assert second.exit_code == 0
    csv = (tmp_path / "verify.csv").read_text()
    assert "within 20% of baseline" in csv


async def test_verify_flags_drift(make_run, tmp_path):
    baseline = tmp_path / "oracle_baseline.json"
    baseline.write_text(json.dumps({"seed": 3, "moser_trials": 1, "constants": {"moser_harnack_d2_l3": 1e6}}))
    section = {"seed": 3, "trials": 1, "mc_trials": 200, "moser_trials": 1, "moser_scales": [3]}
    result = await run_verb("verify", make_run(verify=section))
    assert result.exit_code == 1
    assert [step["name"] for step in result.failures] == ["moser_harnack"]
    assert result.failures[0]["status"] == StepStatus.FAILED.value


async def test_unknown_verb(make_run):
    result = await run_verb("plot", make_run())
    assert result.exit_code == 2


async def test_missing_section_is_a_config_error(make_run):
    result = await run_verb("solve", make_run())
    assert result.exit_code == 2
    assert "ConfigError" in result.error


def test_reproduction_of_the_one_dimensional_comparison():
    params = Figure4Params(seed=0, seeds=2, points=30, K=30)
    first = reproduce(params)
    second = reproduce(params)
    assert first.upper_violations == 0
    assert np.array_equal(first.n, second.n)
    assert first.to_csv() == second.to_csv()
    c1, c2, distance = first.fitted
    assert c1 > 0 and 0.1 <= c2 <= 10.0 and distance >= 0
    assert first.to_csv().splitlines()[0] == "mu,N,Nu,Nu_dual"


@pytest.mark.slow
async def test_figure4_is_bit_stable(make_run, tmp_path):
    run = make_run(figure4={"seed": 0, "seeds": 1, "points": 50})
    result = await run_verb("figure4", run)
    assert result.exit_code == 0, result.error
    first = (tmp_path / "figure4.csv").read_bytes()
    await run_verb("figure4", run)
    assert (tmp_path / "figure4.csv").read_bytes() == first
    assert (tmp_path / "figure4_plateaus.csv").exists()


@pytest.mark.slow
def test_reproduction_fits_close_to_the_upper_law():
    result = reproduce(Figure4Params(seed=0, seeds=10))
    assert result.upper_violations == 0
    c1, c2, distance = result.fitted
    assert c1 > 0 and c2 > 0
    assert distance <= 0.15
