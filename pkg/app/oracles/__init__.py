from app.oracles.chernoff import chernoff_battery, chernoff_bound, kl_divergence
from app.oracles.cube import (
    CubeProblem,
    LatticeBox,
    comparison_function,
    dirichlet_solve,
    make_box,
    torsion,
    torus_window,
)
from app.oracles.harnack import harnack_check, moser_harnack_constant, moser_harnack_ratio, regression_guard
from app.oracles.kernels import DirichletKernels, ibp_residual, kernels, surface_averages
from app.oracles.principles import max_principle_check, poincare_check, submean_check, torsion_comparison_check


__all__ = [
    "CubeProblem",
    "LatticeBox",
    "DirichletKernels",
    "make_box",
    "dirichlet_solve",
    "torsion",
    "comparison_function",
    "torus_window",
    "kernels",
    "ibp_residual",
    "surface_averages",
    "max_principle_check",
    "poincare_check",
    "submean_check",
    "torsion_comparison_check",
    "harnack_check",
    "moser_harnack_ratio",
    "moser_harnack_constant",
    "regression_guard",
    "kl_divergence",
    "chernoff_bound",
    "chernoff_battery",
]
