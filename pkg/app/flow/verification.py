"""
The oracle battery as a flow: each step draws seeded random instances for
one inequality or identity and records failures, the worst margin or the
measured constant.
"""
import asyncio
import json
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.exceptions import LandscapeError
from app.flow.base import BaseFlow, FlowStep, StepStatus
from app.landscape import solve_landscape, uncertainty_residual, uncertainty_tolerance
from app.lattice import Torus
from app.logger import logger
from app.operator import assemble
from app.oracles.chernoff import chernoff_battery
from app.oracles.cube import CubeProblem, box_window, make_box, torus_window
from app.oracles.harnack import harnack_check, moser_harnack_constant, regression_guard
from app.oracles.kernels import ibp_residual, ibp_tolerance, kernel_cache, kernels, surface_averages
from app.oracles.principles import (
    max_principle_check,
    poincare_check,
    random_subharmonic,
    random_subsolution,
    submean_check,
    torsion_comparison_check,
)
from app.potentials import UniformDistribution, sample_anderson, site_stream


class StepOutcome(BaseModel):
    trials: int
    failures: int = 0
    value: Optional[float] = None
    detail: str = ""
    first_error: Optional[str] = None


class _Tally:
    """Failure count, worst margin and the first error message over the trials of one step."""

    def __init__(self):
        self.trials = 0
        self.failures = 0
        self.worst: Optional[float] = None
        self.first_error: Optional[str] = None

    def add(self, passed: bool, margin: Optional[float] = None, error: Optional[str] = None) -> None:
        self.trials += 1
        if not passed:
            self.failures += 1
            if self.first_error is None and error:
                self.first_error = error
        if margin is not None and np.isfinite(margin):
            self.worst = margin if self.worst is None else min(self.worst, margin)

    def outcome(self, detail: str = "") -> StepOutcome:
        if self.first_error:
            detail = f"{detail} first failure: {self.first_error}".strip()
        return StepOutcome(
            trials=self.trials, failures=self.failures, value=self.worst, detail=detail, first_error=self.first_error
        )


_LANDSCAPE_SHAPES = ((1, 40), (1, 64), (2, 10), (2, 12))


class VerificationFlow(BaseFlow):
    """Seeded battery of elliptic and probabilistic oracles; hard steps must pass on every trial."""

    seed: int = 1
    trials: int = Field(500, ge=1)
    mc_trials: int = Field(100_000, ge=100, description="Monte Carlo draws per Chernoff cell")
    moser_trials: int = Field(20, ge=1)
    moser_scales: List[int] = Field(default_factory=lambda: [3, 6, 9])
    baseline_path: Optional[Path] = None
    constants: Dict[str, float] = Field(default_factory=dict)
    pending_baseline: Optional[dict] = Field(None, description="Baseline to record when none exists yet")

    def model_post_init(self, __context) -> None:
        plan: List[Tuple[str, str]] = [
            ("max_principle", "hard"),
            ("poincare", "hard"),
            ("kernel_identities", "hard"),
            ("ibp", "hard"),
            ("surface_averages", "hard"),
            ("harnack", "hard"),
            ("torsion_comparison", "hard"),
            ("submean", "hard"),
            ("landscape_floor", "hard"),
            ("uncertainty_identity", "hard"),
            ("chernoff", "hard"),
            ("moser_harnack", "empirical"),
        ]
        if not self.steps:
            self.steps = [FlowStep(name=name, kind=kind) for name, kind in plan]

    def _runner(self, name: str) -> Callable[[np.random.Generator], StepOutcome]:
        return getattr(self, f"_step_{name}")

    async def execute(self) -> str:
        for index, step in enumerate(self.steps):
            step.status = StepStatus.IN_PROGRESS
            logger.info(f"oracle step {index + 1}/{len(self.steps)}: {step.name}")
            # 各ステップは独立な乱数ストリームを使う
            rng = site_stream(self.seed, index)
            outcome = await asyncio.to_thread(self._runner(step.name), rng)
            step.trials = outcome.trials
            step.failures = outcome.failures
            step.value = outcome.value
            step.detail = outcome.detail
            if step.kind == "empirical":
                step.status = StepStatus.FAILED if outcome.failures else StepStatus.REPORTED
            else:
                step.status = StepStatus.FAILED if outcome.failures else StepStatus.PASSED
            if step.status == StepStatus.FAILED:
                logger.error(f"{step.name}: {outcome.failures}/{outcome.trials} failed. {outcome.detail}")
        # 因子分解はバッテリー単位で保持する
        kernel_cache.clear()
        return self.render_table(color=False)

    # -- hard oracles -------------------------------------------------------

    def _step_max_principle(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for i in range(self.trials):
            d = int(rng.integers(1, 4))
            box = make_box([int(rng.integers(3, 9 if d < 3 else 6)) for _ in range(d)])
            try:
                V, f = random_subsolution(box, rng, with_potential=bool(i % 2))
                result = max_principle_check(box, V, f)
                tally.add(result.passed, result.margin, None if result.passed else f"box {box.lengths} at {result.witness}")
            except LandscapeError as e:
                tally.add(False, error=e.message)
        return tally.outcome()

    def _step_poincare(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for _ in range(self.trials):
            d = int(rng.integers(1, 4))
            box = make_box([int(rng.integers(1, 12 if d < 3 else 6)) for _ in range(d)])
            f = rng.normal(0.0, 10.0 ** rng.uniform(-2, 2), box.shape)
            result = poincare_check(box, f)
            tally.add(result.passed, (result.rhs - result.lhs) / (1.0 + result.rhs), f"box {box.lengths}")
        return tally.outcome("margin relative to 1+rhs")

    def _step_kernel_identities(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        worst_norm = worst_path = worst_sym = 0.0
        for _ in range(self.trials):
            d = int(rng.integers(1, 4))
            r = int(rng.integers(1, {1: 30, 2: 10, 3: 5}[d]))
            problem = CubeProblem(d=d, r=r)
            try:
                kern = kernels(problem)
                norm = kern.normalization_error()
                path = kern.path_agreement()
                poles = [tuple(int(c) for c in rng.integers(1, 2 * r, d)) for _ in range(3)]
                block = kern.green_block(poles)
                sym = float(np.max(np.abs(block - block.T))) / (1.0 + float(np.max(np.abs(block))))
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            worst_norm, worst_path, worst_sym = max(worst_norm, norm), max(worst_path, path), max(worst_sym, sym)
            ok = norm <= 1e-12 and path <= 1e-11 and sym <= 1e-11
            tally.add(ok, -max(norm, path, sym), None if ok else f"d={d}, r={r}")
        return tally.outcome(f"|ΣP-1| {worst_norm:.2e}; |P-∂G| {worst_path:.2e}; G asym {worst_sym:.2e}")

    def _step_ibp(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for _ in range(self.trials):
            d = int(rng.integers(1, 4))
            r = int(rng.integers(1, {1: 30, 2: 10, 3: 5}[d]))
            problem = CubeProblem(d=d, r=r)
            u = rng.normal(0.0, 10.0 ** rng.uniform(-2, 2), problem.shape)
            try:
                residual = ibp_residual(problem, kernels(problem), u)
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            tol = ibp_tolerance(u)
            tally.add(residual <= tol, tol - residual, f"d={d}, r={r}: residual {residual:.3e}")
        return tally.outcome()

    def _landscape_instance(self, rng: np.random.Generator, trial: int):
        d, K = _LANDSCAPE_SHAPES[int(rng.integers(len(_LANDSCAPE_SHAPES)))]
        t = Torus(d=d, K=K)
        high = float(rng.choice([1.0, 8.0, 20.0]))
        V = sample_anderson(t, UniformDistribution(low=0.0, high=high), self.seed, trial)
        H = assemble(t, V)
        return H, solve_landscape(H)

    def _step_surface_averages(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for i in range(self.trials):
            try:
                H, L = self._landscape_instance(rng, i)
                t = H.torus
                r = int(rng.integers(1, min((t.K - 1) // 2, {1: 15, 2: 5}[t.d]) + 1))
                center = [int(c) for c in rng.integers(1, t.K + 1, t.d)]
                u = torus_window(t, L.u, center, r)
                averages = surface_averages(CubeProblem(d=t.d, r=r), u)
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            slack = 1e-10 * (1.0 + float(np.max(u)))
            margin = averages.min_margin
            tally.add(margin >= -slack, margin, f"d={t.d}, r={r}, centre {center}")
        return tally.outcome("min of a_ρ - u_ξ + ρ²")

    def _step_harnack(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for i in range(self.trials):
            try:
                H, L = self._landscape_instance(rng, i)
                t = H.torus
                ell = int(rng.integers(1, min(t.K - 2, 8) + 1))
                lengths = [ell + 2] * t.d
                anchor = [int(c) for c in rng.integers(1, t.K + 1, t.d)]
                box = make_box(lengths)
                f = box_window(t, L.u, anchor, lengths)
                V = box_window(t, H.potential.values, anchor, lengths)[box.interior]
                result = harnack_check(box, V, f)
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            tally.add(result.passed, result.margin, f"d={t.d}, ℓ={ell}")
        return tally.outcome("log-scale margin")

    def _step_torsion_comparison(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for _ in range(self.trials):
            d = int(rng.integers(1, 4))
            r = int(rng.integers(1, {1: 40, 2: 12, 3: 5}[d]))
            result = torsion_comparison_check(d, r)
            tally.add(result.passed, result.margin, f"d={d}, r={r} at {result.witness}")
        return tally.outcome()

    def _step_submean(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        boundary, volume = [], []
        for _ in range(self.trials):
            d = int(rng.integers(1, 4))
            r = int(rng.integers(1, {1: 20, 2: 8, 3: 4}[d]))
            problem = CubeProblem(d=d, r=r)
            try:
                f = random_subharmonic(problem, rng)
                report = submean_check(problem, f)
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            boundary.append(report.boundary_ratio)
            volume.append(report.volume_ratio)
            tally.add(report.passed, report.surface_average - report.value, f"d={d}, r={r}")
        detail = ""
        if boundary:
            detail = f"max f_ξ r^(d-1)/Σ∂Q f {max(boundary):.3g}; max f_ξ r^d/ΣQ f {max(volume):.3g}"
        return tally.outcome(detail)

    def _step_landscape_floor(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for i in range(self.trials):
            try:
                H, L = self._landscape_instance(rng, i)
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            margin = float(np.min(L.u)) - 1.0 / H.potential.vmax
            tally.add(margin >= -1e-9, margin, H.potential.describe())
        return tally.outcome("min u - 1/V_max")

    def _step_uncertainty_identity(self, rng: np.random.Generator) -> StepOutcome:
        tally = _Tally()
        for i in range(self.trials):
            try:
                H, L = self._landscape_instance(rng, i)
            except LandscapeError as e:
                tally.add(False, error=e.message)
                continue
            f = rng.normal(0.0, 10.0 ** rng.uniform(-2, 2), H.torus.shape)
            residual = uncertainty_residual(H, L, f)
            tol = uncertainty_tolerance(H, f)
            tally.add(residual <= tol, tol - residual, f"{H.potential.describe()}: residual {residual:.3e}")
        return tally.outcome()

    def _step_chernoff(self, rng: np.random.Generator) -> StepOutcome:
        results = chernoff_battery(rng, trials=self.mc_trials)
        tally = _Tally()
        for trial in results:
            margin = trial.bound + 3 * trial.standard_error - trial.frequency
            tally.add(trial.passed, margin, f"|B|={trial.size}, p={trial.p}, λ={trial.lam:.3g}")
        return tally.outcome(f"{self.mc_trials} draws per cell")

    # -- empirical constants ------------------------------------------------

    def _step_moser_harnack(self, rng: np.random.Generator) -> StepOutcome:
        by_scale = {ell: moser_harnack_constant(2, ell, self.moser_trials, rng) for ell in self.moser_scales}
        current = {f"moser_harnack_d2_l{ell}": value for ell, value in by_scale.items()}
        self.constants.update(current)
        values = list(by_scale.values())
        spread = max(values) / min(values) if min(values) > 0 else float("inf")
        listing = ", ".join(f"ℓ={ell}: {value:.4g}" for ell, value in by_scale.items())
        parts = [f"ĉ_H {listing}", f"spread x{spread:.3g}" + ("" if spread <= 2 else " (outside factor 2)")]
        drift_note, failures = self._guard(current)
        if drift_note:
            parts.append(drift_note)
        return StepOutcome(trials=self.moser_trials * len(values), failures=failures, value=min(values), detail="; ".join(parts))

    def _baseline_key(self) -> Dict[str, int]:
        return {"seed": self.seed, "moser_trials": self.moser_trials}

    def _guard(self, current: Dict[str, float]) -> Tuple[str, int]:
        """Compare with the stored baseline, or record one; returns a note and the drift count."""
        if self.baseline_path is None:
            return "", 0
        path = Path(self.baseline_path)
        if not path.exists():
            self.pending_baseline = {**self._baseline_key(), "constants": current}
            return f"baseline recorded at {path.name}", 0
        stored = json.loads(path.read_text(encoding="utf-8"))
        if {k: stored.get(k) for k in self._baseline_key()} != self._baseline_key():
            return "baseline belongs to another battery, not compared", 0
        drifts = regression_guard(current, stored.get("constants", {}), tolerance=0.2)
        if not drifts:
            return "within 20% of baseline", 0
        return "; ".join(f"drift {d.key} {d.baseline:.4g} -> {d.current:.4g}" for d in drifts), len(drifts)
