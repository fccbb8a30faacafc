import asyncio

from app.operator import assemble
from app.schema import IdsParams, RunConfig
from app.spectrum import CountingCurve, ids_curve
from app.tool.base import BaseTool, ToolResult
from app.utils.artifacts import artifact_header, curve_outputs, write_artifacts


class IdsTool(BaseTool):
    name: str = "ids"
    description: str = "Count eigenvalues of H below each grid μ and write the N curve."

    @staticmethod
    def _count(params: IdsParams) -> CountingCurve:
        V = params.potential.build()
        H = assemble(V.torus, V)
        grid = params.grid.resolve(V.torus, H.spectral_top)
        return ids_curve(H, grid, strict=params.strict, method=params.method)

    async def execute(self, run: RunConfig) -> ToolResult:
        params: IdsParams = run.params("ids")
        curve = await asyncio.to_thread(self._count, params)
        header = artifact_header(run, seeds=params.potential.seeds, d=curve.metadata["d"], K=curve.metadata["K"])
        paths = await write_artifacts(
            curve_outputs(run, "ids", curve.to_csv(), header, ["value"], f"{curve.kind} of {curve.metadata['potential']}")
        )
        monotone = curve.is_monotone()
        return ToolResult(
            output=f"{curve.kind} on {len(curve.grid)} points, N(μ_max) = {curve.values[-1]:.6g}",
            artifacts=paths,
            checks={"monotone": monotone},
            failures=[] if monotone else [{"check": "monotone"}],
            exit_code=0 if monotone else 1,
        )
