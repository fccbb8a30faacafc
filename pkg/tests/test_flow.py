import pytest
from colorama import Fore

from app.flow.base import FlowStep, StepStatus
from app.flow.flow_factory import FlowFactory, FlowType
from app.flow.verification import VerificationFlow
from app.oracles.kernels import kernel_cache
from app.schema import VerifyParams


def make_flow(**kwargs) -> VerificationFlow:
    settings = dict(seed=4, trials=1, mc_trials=100, moser_trials=1, moser_scales=[3])
    settings.update(kwargs)
    return FlowFactory.create_flow(FlowType.VERIFICATION, **settings)


def test_plan_lists_every_oracle():
    flow = make_flow()
    assert [step.name for step in flow.steps][:2] == ["max_principle", "poincare"]
    assert flow.steps[-1].name == "moser_harnack" and flow.steps[-1].kind == "empirical"
    assert all(step.status == StepStatus.NOT_STARTED for step in flow.steps)


async def test_battery_statuses_and_table():
    flow = make_flow()
    table = await flow.execute()
    assert flow.passed
    assert flow.steps[-1].status == StepStatus.REPORTED
    assert all(step.status == StepStatus.PASSED for step in flow.steps[:-1])
    assert table.startswith("Status: 11 passed, 0 failed, 1 reported")
    assert "[✓] max_principle" in table
    assert Fore.GREEN in flow.render_table(color=True)
    assert Fore.GREEN not in table
    assert "moser_harnack_d2_l3" in flow.constants
    assert flow.pending_baseline is None
    assert len(kernel_cache) == 0


def test_default_battery_size():
    assert FlowFactory.create_flow(FlowType.VERIFICATION).trials == 500
    assert VerifyParams().trials == 500


@pytest.mark.slow
async def test_full_battery_passes_every_hard_oracle():
    flow = FlowFactory.create_flow(FlowType.VERIFICATION, seed=1)
    await flow.execute()
    hard = [step for step in flow.steps if step.kind == "hard"]
    assert all(step.status == StepStatus.PASSED for step in hard), flow.render_table(color=False)
    assert all(step.trials == 500 for step in hard if step.name != "chernoff")
    assert flow.steps[-1].status == StepStatus.REPORTED
    assert {"moser_harnack_d2_l3", "moser_harnack_d2_l6", "moser_harnack_d2_l9"} <= set(flow.constants)


def test_csv_escapes_commas():
    flow = make_flow(steps=[FlowStep(name="x", status=StepStatus.FAILED, detail="a, b", failures=1, trials=2)])
    lines = flow.to_csv().splitlines()
    assert lines[1] == "x,hard,failed,2,1,,a; b"
    assert not flow.passed


def test_unknown_flow_type():
    with pytest.raises(ValueError):
        FlowFactory.create_flow("planning")
