import json

from app.flow.base import StepStatus
from app.flow.flow_factory import FlowFactory, FlowType
from app.schema import RunConfig, Verbosity, VerifyParams
from app.tool.base import BaseTool, ToolResult
from app.utils.artifacts import artifact_header, output_dir, write_artifact, write_artifacts


class VerifyTool(BaseTool):
    name: str = "verify"
    description: str = "Run the seeded oracle battery and write the pass/fail table."

    async def execute(self, run: RunConfig) -> ToolResult:
        params: VerifyParams = run.params("verify")
        directory = output_dir(run)
        baseline = params.baseline or directory / "oracle_baseline.json"
        flow = FlowFactory.create_flow(
            FlowType.VERIFICATION,
            seed=params.seed,
            trials=params.trials,
            mc_trials=params.mc_trials,
            moser_trials=params.moser_trials,
            moser_scales=params.moser_scales,
            baseline_path=baseline,
        )
        table = await flow.execute()

        header = artifact_header(run, seeds=str(params.seed), trials=params.trials)
        paths = await write_artifacts(
            [
                (directory / "verify.txt", table, header),
                (directory / "verify.csv", flow.to_csv(), header),
            ]
        )
        if flow.pending_baseline is not None:
            paths.append(await write_artifact(baseline, json.dumps(flow.pending_baseline, indent=2) + "\n"))

        checks = {step.name: step.status != StepStatus.FAILED for step in flow.steps}
        failures = [step.model_dump(mode="json") for step in flow.failed_steps]
        return ToolResult(
            output=flow.render_table(color=run.verbosity != Verbosity.QUIET),
            artifacts=paths,
            checks=checks,
            failures=failures,
            exit_code=0 if flow.passed else 1,
        )
