import json

import pytest

from app.exceptions import ConfigError
from app.schema import RunConfig, build_run_config, load_run_file, merge_overrides
from main import build_parser, collect_overrides, main


def test_flags_become_section_overrides():
    args = build_parser().parse_args(
        ["--workers", "3", "ids", "--d", "2", "--K", "6", "--distribution", "bernoulli", "--p", "0.3", "--points", "12", "--strict"]
    )
    overrides = collect_overrides(args)
    assert overrides["workers"] == 3
    assert overrides["ids"]["potential"] == {
        "d": 2,
        "K": 6,
        "distribution": {"kind": "bernoulli", "p": 0.3},
    }
    assert overrides["ids"]["grid"] == {"points": 12}
    assert overrides["ids"]["strict"] is True


def test_set_overrides_are_read_as_yaml_scalars():
    args = build_parser().parse_args(["--set", "verify.trials=7", "--set", "verify.moser_scales=[3, 6]", "verify"])
    overrides = collect_overrides(args)
    assert overrides["verify"] == {"trials": 7, "moser_scales": [3, 6]}


def test_merge_keeps_nested_keys():
    base = {"ids": {"potential": {"d": 1, "K": 8}, "strict": False}}
    merged = merge_overrides(base, {"ids": {"potential": {"K": 10}}})
    assert merged == {"ids": {"potential": {"d": 1, "K": 10}, "strict": False}}


def test_run_files(tmp_path):
    yaml_file = tmp_path / "run.yaml"
    yaml_file.write_text("workers: 2\nverify:\n  trials: 5\n")
    toml_file = tmp_path / "run.toml"
    toml_file.write_text("workers = 2\n[verify]\ntrials = 5\n")
    assert load_run_file(yaml_file) == load_run_file(toml_file)

    run = build_run_config(yaml_file, {"verify": {"seed": 9}})
    assert run.verify.trials == 5 and run.verify.seed == 9

    with pytest.raises(ConfigError):
        load_run_file(tmp_path / "missing.yaml")
    bad = tmp_path / "run.ini"
    bad.write_text("x=1")
    with pytest.raises(ConfigError):
        load_run_file(bad)


def test_validation_errors_name_the_key_path():
    with pytest.raises(ConfigError) as info:
        build_run_config(overrides={"ids": {"potential": {"d": 1, "K": 2, "constant": 1.0}, "grid": {"points": 1}}})
    assert "ids.grid.points" in info.value.message
    with pytest.raises(ConfigError) as info:
        build_run_config(overrides={"solve": {"potential": {"d": 1, "K": 8}}})
    assert "solve.potential" in info.value.message


def test_config_hash_is_canonical():
    a = RunConfig(ensemble={"d": 1, "K": 8, "distribution": {"kind": "uniform"}, "realizations": 2, "master_seed": 1, "outputs": ["N_u", "N"]})
    b = RunConfig(ensemble={"d": 1, "K": 8, "distribution": {"kind": "uniform"}, "realizations": 2, "master_seed": 1, "outputs": ["N", "N_u"]})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig().config_hash()


def test_main_runs_a_verb(tmp_path):
    code = main(["--output", str(tmp_path), "--no-plot", "--quiet", "solve", "--d", "1", "--K", "12", "--distribution", "uniform", "--high", "4", "--seed", "2"])
    assert code == 0
    assert "# command: landscape --output" in (tmp_path / "landscape.txt").read_text()


def test_main_reports_config_errors(tmp_path, capsys):
    assert main(["--output", str(tmp_path), "--set", "bogus=1", "verify"]) == 2
    report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert report["verb"] == "verify" and report["exit_code"] == 2


def test_main_writes_a_failure_report(tmp_path):
    assert main(["--output", str(tmp_path), "--quiet", "dual", "--d", "1", "--K", "9", "--distribution", "uniform"]) == 2
    report = json.loads((tmp_path / "dual_failure.json").read_text())
    assert report["exit_code"] == 2
    assert "ParityError" in report["error"]
