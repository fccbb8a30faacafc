import asyncio
from typing import Optional, Tuple

import numpy as np

from app.boxcount import nu_curve
from app.landscape import LandscapeField, solve_landscape
from app.operator import assemble
from app.schema import BoxcountParams, RunConfig
from app.spectrum import CountingCurve
from app.tool.base import BaseTool, ToolResult
from app.utils.artifacts import artifact_header, curve_outputs, write_artifacts


def load_or_solve(params) -> Tuple[LandscapeField, float, Optional[str]]:
    """(landscape, spectral top, seeds) from a landscape file or a potential."""
    if params.landscape is not None:
        L = LandscapeField.read(params.landscape)
        # 1/u <= V_max, so 4d + max 1/u bounds the top from below
        return L, 4.0 * L.torus.d + float(np.max(L.effective)), None
    V = params.potential.build()
    H = assemble(V.torus, V)
    L = solve_landscape(H, allow_constant=params.potential.allow_constant)
    return L, H.spectral_top, params.potential.seeds


class BoxcountTool(BaseTool):
    name: str = "boxcount"
    description: str = "Box-count the effective potential 1/u and write the N_u curve."

    @staticmethod
    def _count(params: BoxcountParams) -> Tuple[CountingCurve, Optional[str]]:
        L, top, seeds = load_or_solve(params)
        grid = params.grid.resolve(L.torus, top)
        return nu_curve(L, grid, shift=params.shift), seeds

    async def execute(self, run: RunConfig) -> ToolResult:
        params: BoxcountParams = run.params("boxcount")
        curve, seeds = await asyncio.to_thread(self._count, params)
        header = artifact_header(run, seeds=seeds, d=curve.metadata["d"], K=curve.metadata["K"], shift=params.shift)
        paths = await write_artifacts(curve_outputs(run, "nu", curve.to_csv(), header, ["value"], "box counting N_u"))
        return ToolResult(
            output=f"N_u on {len(curve.grid)} points, N_u(μ_max) = {curve.values[-1]:.6g}",
            artifacts=paths,
        )
