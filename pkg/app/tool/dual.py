import asyncio
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.boxcount import LawReport, dual_bound_check, dual_nu_curve
from app.config import config
from app.exceptions import ParityError
from app.landscape import solve_landscape
from app.operator import assemble
from app.schema import DualParams, RunConfig
from app.spectrum import counts, dual_identity_check, dual_spectrum_deviation, ids_curve
from app.tool.base import BaseTool, ToolResult
from app.utils.artifacts import artifact_header, curve_outputs, write_artifacts


class DualRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: np.ndarray
    n: np.ndarray
    complement: np.ndarray
    nu_dual: np.ndarray
    identity_deviation: int
    spectrum_deviation: Optional[float]
    law: LawReport
    d: int
    K: int

    def to_csv(self) -> str:
        digits = config.output.significant_digits
        rows = ["mu,N,one_minus_Nstrict_dual,Nu_dual"]
        for row in zip(self.grid, self.n, self.complement, self.nu_dual):
            rows.append(",".join(f"{x:.{digits}g}" for x in row))
        return "\n".join(rows) + "\n"

    @property
    def checks(self) -> Dict[str, bool]:
        checks = {"dual_identity": self.identity_deviation == 0, "dual_law": self.law.holds}
        if self.spectrum_deviation is not None:
            checks["dual_spectrum"] = self.spectrum_deviation <= 1e-9
        return checks


class DualTool(BaseTool):
    name: str = "dual"
    description: str = "Dual Hamiltonian H̃ = −Δ + V_max − V: identity check, dual landscape curves and the dual law."

    @staticmethod
    def _run(params: DualParams) -> DualRun:
        V = params.potential.build()
        t = V.torus
        if t.K % 2:
            raise ParityError(f"dual runs need an even K, got K={t.K}")
        H = assemble(t, V)
        H_dual = H.dual()
        top = H.spectral_top
        grid = params.grid.resolve(t, top)
        n = ids_curve(H, grid, method=params.method)
        strict_dual = np.array(counts(H_dual, top - grid, strict=True, method=params.method), dtype=float)
        spectrum_deviation = dual_spectrum_deviation(H) if H.size <= config.spectrum.dense_max_sites else None
        L_dual = solve_landscape(H_dual, allow_constant=params.potential.allow_constant)
        return DualRun(
            grid=grid,
            n=n.values,
            complement=1.0 - strict_dual / H.size,
            nu_dual=dual_nu_curve(L_dual, grid, top).values,
            identity_deviation=dual_identity_check(H, grid, method=params.method),
            spectrum_deviation=spectrum_deviation,
            law=dual_bound_check(n, L_dual, top),
            d=t.d,
            K=t.K,
        )

    async def execute(self, run: RunConfig) -> ToolResult:
        params: DualParams = run.params("dual")
        result = await asyncio.to_thread(self._run, params)
        header = artifact_header(run, seeds=params.potential.seeds, d=result.d, K=result.K)
        items = curve_outputs(
            run, "dual", result.to_csv(), header, ["N", "one_minus_Nstrict_dual", "Nu_dual"], "dual landscape curves"
        )
        items += curve_outputs(run, "dual_law", result.law.to_csv(), header, ["lhs", "rhs"], "N(μ) against 1 - N_ũ(4dμ̃)")
        paths = await write_artifacts(items)

        checks = result.checks
        failures = []
        if not checks["dual_identity"]:
            failures.append({"check": "dual_identity", "max_deviation": result.identity_deviation})
        if not checks.get("dual_spectrum", True):
            failures.append({"check": "dual_spectrum", "max_deviation": result.spectrum_deviation})
        failures += [{"check": "dual_law", "mu": mu, "N": lhs, "rhs": rhs} for mu, lhs, rhs in result.law.violations]
        spectrum = "" if result.spectrum_deviation is None else f", spectrum deviation {result.spectrum_deviation:.2e}"
        return ToolResult(
            output=f"dual identity deviation {result.identity_deviation}{spectrum}\n{result.law.summary()}",
            artifacts=paths,
            checks=checks,
            failures=failures,
            exit_code=0 if all(checks.values()) else 1,
        )
