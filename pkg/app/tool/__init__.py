from app.tool.base import BaseTool, ToolFailure, ToolResult
from app.tool.boxcount import BoxcountTool
from app.tool.compare import CompareTool
from app.tool.dual import DualTool
from app.tool.ensemble import EnsembleTool
from app.tool.figure4 import Figure4Tool
from app.tool.ids import IdsTool
from app.tool.solve import SolveTool
from app.tool.tool_collection import ToolCollection
from app.tool.verify import VerifyTool


def default_tools() -> ToolCollection:
    """One tool per CLI verb."""
    return ToolCollection(
        SolveTool(),
        IdsTool(),
        BoxcountTool(),
        CompareTool(),
        DualTool(),
        EnsembleTool(),
        VerifyTool(),
        Figure4Tool(),
    )


__all__ = [
    "BaseTool",
    "ToolResult",
    "ToolFailure",
    "ToolCollection",
    "SolveTool",
    "IdsTool",
    "BoxcountTool",
    "CompareTool",
    "DualTool",
    "EnsembleTool",
    "VerifyTool",
    "Figure4Tool",
    "default_tools",
]
