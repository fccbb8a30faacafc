from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Literal, Optional

from colorama import Fore, Style
from pydantic import BaseModel, ConfigDict, Field


class FlowType(str, Enum):
    VERIFICATION = "verification"


class StepStatus(str, Enum):
    NOT_STARTED = "not_started"
    IN_PROGRESS = "in_progress"
    PASSED = "passed"
    FAILED = "failed"
    REPORTED = "reported"


_MARKS = {
    StepStatus.NOT_STARTED: ("[ ]", ""),
    StepStatus.IN_PROGRESS: ("[→]", Fore.YELLOW),
    StepStatus.PASSED: ("[✓]", Fore.GREEN),
    StepStatus.FAILED: ("[!]", Fore.RED),
    StepStatus.REPORTED: ("[i]", Fore.CYAN),
}


class FlowStep(BaseModel):
    """One oracle of the battery and what it found."""

    name: str
    kind: Literal["hard", "empirical"] = "hard"
    status: StepStatus = StepStatus.NOT_STARTED
    trials: int = 0
    failures: int = 0
    value: Optional[float] = Field(None, description="Worst margin for hard steps, the measured constant otherwise")
    detail: str = ""


class BaseFlow(BaseModel, ABC):
    """Base class for flows that run a plan of steps and track their statuses."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    steps: List[FlowStep] = Field(default_factory=list)

    @property
    def failed_steps(self) -> List[FlowStep]:
        return [step for step in self.steps if step.status == StepStatus.FAILED]

    @property
    def passed(self) -> bool:
        return not self.failed_steps

    def render_table(self, color: bool = True) -> str:
        """Plain-text status table; colour codes only when `color` is set."""
        counts = {status: 0 for status in StepStatus}
        for step in self.steps:
            counts[step.status] += 1
        width = max((len(step.name) for step in self.steps), default=4)
        lines = [
            f"Status: {counts[StepStatus.PASSED]} passed, {counts[StepStatus.FAILED]} failed, "
            f"{counts[StepStatus.REPORTED]} reported",
            "",
        ]
        for step in self.steps:
            mark, tint = _MARKS[step.status]
            value = "" if step.value is None else f"{step.value:.6g}"
            row = f"{mark} {step.name:<{width}}  {step.kind:<9}  {step.failures}/{step.trials:<6}  {value:>12}  {step.detail}"
            lines.append(f"{tint}{row}{Style.RESET_ALL}" if color and tint else row)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["step,kind,status,trials,failures,value,detail"]
        for step in self.steps:
            value = "" if step.value is None else repr(step.value)
            detail = step.detail.replace(",", ";")
            rows.append(f"{step.name},{step.kind},{step.status.value},{step.trials},{step.failures},{value},{detail}")
        return "\n".join(rows) + "\n"

    @abstractmethod
    async def execute(self) -> str:
        """Execute the flow and return the rendered status table."""
        raise NotImplementedError("Subclasses must implement execute method")
