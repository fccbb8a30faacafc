"""
Artifact emission: `# key: value` metadata headers, async file writes and
JSON sidecars.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import aiofiles
from pydantic import BaseModel, Field

from app import __version__
from app.config import config
from app.schema import RunConfig
from app.utils.plot_template import render_plot_script


class ArtifactHeader(BaseModel):
    """Everything needed to regenerate an artifact bit-identically."""

    version: str = __version__
    config_hash: str
    seeds: str = "none"
    solver_residual_tol: float
    command: str = ""
    extra: Dict[str, Any] = Field(default_factory=dict)

    def render(self) -> str:
        lines = [
            f"# version: {self.version}",
            f"# config_hash: {self.config_hash}",
            f"# seeds: {self.seeds}",
            f"# solver_residual_tol: {self.solver_residual_tol:g}",
            f"# command: {self.command}",
        ]
        lines += [f"# {key}: {value}" for key, value in self.extra.items()]
        return "\n".join(lines) + "\n"


def artifact_header(run: RunConfig, seeds: Optional[str] = None, **extra: Any) -> ArtifactHeader:
    return ArtifactHeader(
        config_hash=run.config_hash(),
        seeds=seeds or "none",
        solver_residual_tol=config.solver.residual_tol,
        command=run.command,
        extra=extra,
    )


def output_dir(run: RunConfig) -> Path:
    return config.get_output_path(run.output_dir)


async def write_artifact(path: Path, body: str, header: Optional[ArtifactHeader] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8") as file:
        await file.write((header.render() if header else "") + body)
    return path


async def write_sidecar(path: Path, meta: Dict[str, Any], header: ArtifactHeader) -> Path:
    """`<artifact>.meta.json` next to the artifact."""
    sidecar = Path(path).with_name(Path(path).name + ".meta.json")
    payload = {**header.model_dump(exclude={"extra"}), **header.extra, **meta}
    return await write_artifact(sidecar, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


async def write_artifacts(items: List[tuple]) -> List[Path]:
    """Write (path, body, header) triples one after another."""
    return [await write_artifact(path, body, header) for path, body, header in items]


def curve_outputs(
    run: RunConfig,
    stem: str,
    body: str,
    header: ArtifactHeader,
    columns: List[str],
    title: str,
) -> List[tuple]:
    """The CSV triple plus, when plotting is on, the rendered plot script."""
    directory = output_dir(run)
    items = [(directory / f"{stem}.csv", body, header)]
    if run.plot:
        items.append((directory / f"{stem}_plot.py", render_plot_script(f"{stem}.csv", columns, title), None))
    return items
