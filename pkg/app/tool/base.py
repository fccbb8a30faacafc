from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.schema import RunConfig


class BaseTool(ABC, BaseModel):
    """One CLI verb: reads its parameter record from the run config and emits artifacts."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    description: str

    async def __call__(self, run: RunConfig) -> "ToolResult":
        """Execute the tool with the given run configuration."""
        return await self.execute(run)

    @abstractmethod
    async def execute(self, run: RunConfig) -> "ToolResult":
        """Execute the tool with the given run configuration."""


class ToolResult(BaseModel):
    """Represents the result of a tool execution."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    output: Any = Field(default=None)
    error: Optional[str] = Field(default=None)
    exit_code: int = 0
    artifacts: List[Path] = Field(default_factory=list)
    checks: Dict[str, bool] = Field(default_factory=dict, description="Hard check name -> passed")
    failures: List[Dict[str, Any]] = Field(default_factory=list, description="Machine-readable failure rows")

    def __bool__(self):
        return any(getattr(self, field) for field in ("output", "error", "artifacts"))

    @property
    def passed(self) -> bool:
        return self.exit_code == 0

    def __str__(self):
        return f"Error: {self.error}" if self.error else str(self.output or "")


class ToolFailure(ToolResult):
    """A ToolResult that represents a failure."""

    exit_code: int = 3
