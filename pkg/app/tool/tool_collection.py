"""Collection classes for managing multiple tools."""
from typing import Optional

from app.exceptions import LandscapeError
from app.logger import logger
from app.schema import RunConfig
from app.tool.base import BaseTool, ToolFailure, ToolResult


class ToolCollection:
    """A collection of defined tools."""

    def __init__(self, *tools: BaseTool):
        self.tools = tools
        self.tool_map = {tool.name: tool for tool in tools}

    def __iter__(self):
        return iter(self.tools)

    async def execute(self, *, name: str, run: RunConfig) -> ToolResult:
        tool = self.tool_map.get(name)
        if not tool:
            return ToolFailure(error=f"Tool {name} is invalid", exit_code=2)
        try:
            return await tool(run)
        except LandscapeError as e:
            logger.error(f"{name} failed ({type(e).__name__}): {e.message}")
            return ToolFailure(error=f"{type(e).__name__}: {e.message}", exit_code=e.exit_code)

    def get_tool(self, name: str) -> Optional[BaseTool]:
        return self.tool_map.get(name)
