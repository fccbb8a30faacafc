import argparse
import asyncio
import json
import sys
from typing import Any, Dict, List, Optional

import yaml

from app.config import config
from app.exceptions import ConfigError
from app.logger import define_log_level, logger
from app.schema import RunConfig, Verbosity, build_run_config, merge_overrides
from app.tool import ToolResult, default_tools
from app.utils.artifacts import output_dir, write_artifact


def _add_potential_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("potential")
    group.add_argument("--potential", help="flat-format potential file (`d K` then K^d values)")
    group.add_argument("--d", type=int, help="lattice dimension")
    group.add_argument("--K", type=int, help="torus side length")
    group.add_argument("--distribution", choices=["uniform", "bernoulli"], help="Anderson single-site law")
    group.add_argument("--low", type=float, help="uniform: lower end of the support")
    group.add_argument("--high", type=float, help="uniform: upper end; bernoulli: atom height")
    group.add_argument("--p", type=float, help="bernoulli: probability of the nonzero atom")
    group.add_argument("--seed", type=int, help="master seed of the Philox stream")
    group.add_argument("--realization", type=int, help="realization index within the seed")
    group.add_argument("--cell", help="comma-separated one-dimensional periodic cell")
    group.add_argument("--constant", type=float, help="constant potential value")
    group.add_argument("--allow-constant", action="store_true", default=None, help="admit flagged constant potentials")


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("μ grid")
    group.add_argument("--points", type=int, help="number of log-spaced grid points")
    group.add_argument("--mu-min", type=float, help="smallest grid μ")
    group.add_argument("--mu-max", type=float, help="largest grid μ")


def _add_method_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=["auto", "dense", "inertia"], help="eigenvalue counting route")


def _distribution(args: argparse.Namespace) -> Optional[Dict[str, Any]]:
    if not args.distribution:
        return None
    dist: Dict[str, Any] = {"kind": args.distribution}
    if args.distribution == "uniform":
        if args.low is not None:
            dist["low"] = args.low
        if args.high is not None:
            dist["high"] = args.high
    else:
        if args.p is not None:
            dist["p"] = args.p
        if args.high is not None:
            dist["height"] = args.high
    return dist


def _pick(args: argparse.Namespace, mapping: Dict[str, str]) -> Dict[str, Any]:
    """{config key: flag value} for every flag that was given."""
    values = {}
    for flag, key in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    return values


def _potential_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    source = _pick(
        args,
        {
            "potential": "file",
            "d": "d",
            "K": "K",
            "seed": "seed",
            "realization": "realization",
            "constant": "constant",
            "allow_constant": "allow_constant",
        },
    )
    dist = _distribution(args)
    if dist:
        source["distribution"] = dist
    if args.cell:
        source["cell"] = [float(x) for x in args.cell.split(",")]
    return source


def _grid_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return _pick(args, {"points": "points", "mu_min": "mu_min", "mu_max": "mu_max"})


def _parse_set(items: List[str]) -> Dict[str, Any]:
    """`a.b.c=value` pairs into a nested mapping; values are read as YAML scalars."""
    overrides: Dict[str, Any] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key.path=value, got {item!r}")
        node = overrides
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = yaml.safe_load(raw)
    return overrides


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = _pick(args, {"output": "output_dir", "workers": "workers"})
    if args.verbose:
        overrides["verbosity"] = Verbosity.VERBOSE.value
    elif args.quiet:
        overrides["verbosity"] = Verbosity.QUIET.value
    if args.no_plot:
        overrides["plot"] = False

    verb = args.verb
    section: Dict[str, Any] = {}
    if verb in ("solve", "ids", "boxcount", "compare", "dual"):
        potential = _potential_overrides(args)
        if potential:
            section["potential"] = potential
    if verb in ("ids", "boxcount", "compare", "dual"):
        grid = _grid_overrides(args)
        if grid:
            section["grid"] = grid
    if verb == "solve":
        section.update(_pick(args, {"solver": "method"}))
    elif verb in ("ids", "compare", "dual"):
        section.update(_pick(args, {"method": "method"}))
        if verb == "ids" and args.strict:
            section["strict"] = True
        if verb == "compare":
            section.update(_pick(args, {"n_curve": "n_curve", "landscape": "landscape"}))
            if args.no_fit:
                section["fit"] = False
    elif verb == "boxcount":
        section.update(_pick(args, {"landscape": "landscape", "shift": "shift"}))
    elif verb == "ensemble":
        section.update(
            _pick(
                args,
                {
                    "d": "d",
                    "K": "K",
                    "realizations": "realizations",
                    "seed": "master_seed",
                    "outputs": "outputs",
                    "window": "window",
                    "mu0": "mu0",
                    "k_star": "k_star",
                    "allow_constant": "allow_constant",
                },
            )
        )
        dist = _distribution(args)
        if dist:
            section["distribution"] = dist
    elif verb == "verify":
        section.update(
            _pick(
                args,
                {
                    "seed": "seed",
                    "trials": "trials",
                    "mc_trials": "mc_trials",
                    "moser_trials": "moser_trials",
                    "baseline": "baseline",
                },
            )
        )
    elif verb == "figure4":
        section.update(_pick(args, {"seed": "seed", "seeds": "seeds", "points": "points"}))

    if section:
        overrides[verb] = section
    return merge_overrides(overrides, _parse_set(args.set))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landscape", description="Landscape law numerics for Anderson-type operators")
    parser.add_argument("--config", help="run configuration file (.yaml, .json or .toml)")
    parser.add_argument("--output", help="artifact directory")
    parser.add_argument("--workers", type=int, help="worker pool size for ensemble runs")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a run config key, e.g. ids.grid.points=50")
    parser.add_argument("--no-plot", action="store_true", help="do not render plot scripts")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="debug output on the console")
    noise.add_argument("--quiet", action="store_true", help="warnings and errors only")

    verbs = parser.add_subparsers(dest="verb", required=True)

    solve = verbs.add_parser("solve", help="potential -> landscape field file")
    _add_potential_args(solve)
    solve.add_argument("--solver", choices=["auto", "direct", "cg"], help="linear solver path")

    ids = verbs.add_parser("ids", help="Hamiltonian -> N curve CSV")
    _add_potential_args(ids)
    _add_grid_args(ids)
    _add_method_arg(ids)
    ids.add_argument("--strict", action="store_true", help="count eigenvalues strictly below μ")

    boxcount = verbs.add_parser("boxcount", help="landscape -> N_u curve CSV")
    _add_potential_args(boxcount)
    _add_grid_args(boxcount)
    boxcount.add_argument("--landscape", help="landscape field file written by `solve`")
    boxcount.add_argument("--shift", type=int, help="partition shift")

    compare = verbs.add_parser("compare", help="upper law check and practical fit -> law report CSV")
    _add_potential_args(compare)
    _add_grid_args(compare)
    _add_method_arg(compare)
    compare.add_argument("--n-curve", help="N curve CSV written by `ids`")
    compare.add_argument("--landscape", help="landscape field file written by `solve`")
    compare.add_argument("--no-fit", action="store_true", help="skip the c1, c2 fit")

    dual = verbs.add_parser("dual", help="dual Hamiltonian curves and identity check (even K)")
    _add_potential_args(dual)
    _add_grid_args(dual)
    _add_method_arg(dual)

    ensemble = verbs.add_parser("ensemble", help="Monte Carlo mean curves and tail fit")
    ensemble.add_argument("--d", type=int)
    ensemble.add_argument("--K", type=int)
    ensemble.add_argument("--distribution", choices=["uniform", "bernoulli"])
    ensemble.add_argument("--low", type=float)
    ensemble.add_argument("--high", type=float)
    ensemble.add_argument("--p", type=float)
    ensemble.add_argument("--realizations", type=int)
    ensemble.add_argument("--seed", type=int, help="master seed")
    ensemble.add_argument("--outputs", nargs="+", choices=["N", "N_u", "Nu_dual"])
    ensemble.add_argument("--window", type=float, nargs=2, metavar=("MU_LO", "MU_HI"), help="tail-fit window")
    ensemble.add_argument("--mu0", type=float, help="upper end of the default tail window")
    ensemble.add_argument("--k-star", type=float, help="tail window starts at K_*/K^2")
    ensemble.add_argument("--allow-constant", action="store_true", default=None)

    verify = verbs.add_parser("verify", help="oracle battery -> pass/fail table")
    verify.add_argument("--seed", type=int)
    verify.add_argument("--trials", type=int, help="random instances per hard oracle")
    verify.add_argument("--mc-trials", type=int, help="Monte Carlo draws per Chernoff cell")
    verify.add_argument("--moser-trials", type=int, help="instances per Moser-Harnack scale")
    verify.add_argument("--baseline", help="regression baseline JSON")

    figure4 = verbs.add_parser("figure4", help="canned d=1, K=300, uniform[0,10] reproduction")
    figure4.add_argument("--seed", type=int)
    figure4.add_argument("--seeds", type=int, help="realizations averaged")
    figure4.add_argument("--points", type=int, help="grid points")
    return parser


def _apply_verbosity(run: RunConfig) -> None:
    level = {
        Verbosity.VERBOSE: "DEBUG",
        Verbosity.QUIET: "WARNING",
        Verbosity.NORMAL: config.logging.level,
    }[run.verbosity]
    define_log_level(print_level=level)


async def run_verb(verb: str, run: RunConfig) -> ToolResult:
    result = await default_tools().execute(name=verb, run=run)
    if not result.passed:
        report = {
            "verb": verb,
            "exit_code": result.exit_code,
            "error": result.error,
            "checks": result.checks,
            "failures": result.failures,
            "config_hash": run.config_hash(),
        }
        path = output_dir(run) / f"{verb}_failure.json"
        await write_artifact(path, json.dumps(report, indent=2, default=str) + "\n")
        result.artifacts.append(path)
    return result


def main(argv: Optional[List[str]] = None) -> int:
    """Parse the command line, run one verb and return its exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        run = build_run_config(args.config, collect_overrides(args)).with_command(" ".join(["landscape", *argv]))
    except ConfigError as e:
        logger.error(f"invalid run configuration:\n{e.message}")
        print(json.dumps({"verb": args.verb, "exit_code": e.exit_code, "error": e.message}), file=sys.stderr)
        return e.exit_code
    _apply_verbosity(run)

    try:
        result = asyncio.run(run_verb(args.verb, run))
    except KeyboardInterrupt:
        logger.warning("interrupted")
        return 130

    print(str(result))
    for path in result.artifacts:
        logger.info(f"wrote {path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
