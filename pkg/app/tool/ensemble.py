import asyncio
from typing import Optional, Tuple

from app.ensemble import EnsembleResult, TailFit, run_ensemble, tail_fit, tail_window
from app.logger import logger
from app.schema import EnsembleParams, RunConfig, Verbosity
from app.tool.base import BaseTool, ToolResult
from app.utils.artifacts import artifact_header, curve_outputs, write_artifacts, write_sidecar


class EnsembleTool(BaseTool):
    name: str = "ensemble"
    description: str = "Monte Carlo mean curves over seeded Anderson realizations, with an optional Lifschitz tail fit."

    @staticmethod
    def _run(params: EnsembleParams, workers: Optional[int], progress: bool) -> Tuple[EnsembleResult, Optional[TailFit]]:
        cfg = params.ensemble_config()
        result = run_ensemble(cfg, workers=workers, progress=progress)
        fit = None
        if "N" in cfg.outputs and (params.window or params.mu0):
            window = params.window or tail_window(cfg, params.mu0)
            fit = tail_fit(result, window)
        elif params.window or params.mu0:
            logger.warning("tail fit requested without the N curve among the outputs; skipped")
        return result, fit

    async def execute(self, run: RunConfig) -> ToolResult:
        params: EnsembleParams = run.params("ensemble")
        progress = run.verbosity != Verbosity.QUIET
        result, fit = await asyncio.to_thread(self._run, params, run.workers, progress)

        seed, count = result.seeds()
        header = artifact_header(run, seeds=f"{seed}:0..{count - 1}", d=params.d, K=params.K)
        body = result.to_csv()
        columns = [c for c in body.splitlines()[0].split(",") if c.startswith("mean_")]
        items = curve_outputs(run, "ensemble", body, header, columns, f"ensemble means over {count} realizations")
        paths = await write_artifacts(items)
        meta = result.metadata()
        if fit is not None:
            meta["tail_fit"] = fit.model_dump()
        paths.append(await write_sidecar(paths[0], meta, header))

        holds = result.upper_violations == 0
        output = f"{count} realizations on d={params.d}, K={params.K}; upper-law violations: {result.upper_violations}"
        if fit is not None:
            output += f"\nLifschitz slope {fit.slope:.4f} on μ in [{fit.window[0]:.4g}, {fit.window[1]:.4g}]"
        return ToolResult(
            output=output,
            artifacts=paths,
            checks={"upper_law": holds},
            failures=[] if holds else [{"check": "upper_law", "violations": result.upper_violations}],
            exit_code=0 if holds else 1,
        )
