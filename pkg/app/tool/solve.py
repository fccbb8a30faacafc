import asyncio
from typing import Tuple

import numpy as np

from app.config import config
from app.landscape import LandscapeField, landscape_floor_margin, solve_landscape
from app.operator import Hamiltonian, assemble
from app.schema import RunConfig, SolveParams
from app.tool.base import BaseTool, ToolResult
from app.utils.artifacts import artifact_header, output_dir, write_artifacts


class SolveTool(BaseTool):
    name: str = "solve"
    description: str = "Solve the landscape equation Hu = 1 for one potential and write the field u."

    @staticmethod
    def _solve(params: SolveParams) -> Tuple[Hamiltonian, LandscapeField]:
        V = params.potential.build()
        H = assemble(V.torus, V)
        return H, solve_landscape(H, method=params.method, allow_constant=params.potential.allow_constant)

    async def execute(self, run: RunConfig) -> ToolResult:
        params: SolveParams = run.params("solve")
        H, L = await asyncio.to_thread(self._solve, params)
        V = H.potential
        margin = landscape_floor_margin(H, L)
        floor_ok = margin >= -1e-9

        digits = config.output.significant_digits
        header = artifact_header(
            run,
            seeds=params.potential.seeds,
            d=V.torus.d,
            K=V.torus.K,
            solver=L.method,
            residual_norm=f"{L.residual_norm:.3e}",
        )
        directory = output_dir(run)
        paths = await write_artifacts(
            [
                (directory / "landscape.txt", L.to_text(digits), header),
                (directory / "potential.txt", V.to_text(digits), header),
            ]
        )
        output = (
            f"landscape of {V.describe()}: u in [{np.min(L.u):.6g}, {np.max(L.u):.6g}], "
            f"residual {L.residual_norm:.2e} ({L.method}), min u - 1/V_max = {margin:.3e}"
        )
        failures = [] if floor_ok else [{"check": "landscape_floor", "margin": margin}]
        return ToolResult(
            output=output,
            artifacts=paths,
            checks={"landscape_floor": floor_ok},
            failures=failures,
            exit_code=0 if floor_ok else 1,
        )
