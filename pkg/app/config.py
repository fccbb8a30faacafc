import threading
import tomllib
from pathlib import Path
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.exceptions import ConfigError


def get_project_root() -> Path:
    """Get the project root directory"""
    return Path(__file__).resolve().parent.parent


PROJECT_ROOT = get_project_root()


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    direct_max_sites: int = Field(20000, description="Largest K^d solved by direct factorization")
    cg_rtol: float = Field(1e-12, description="Relative residual target for conjugate gradient")
    residual_tol: float = Field(1e-10, description="Accepted max-norm of Hu - 1")
    max_iter_factor: int = Field(10, description="CG iteration cap as a multiple of K^d")


class SpectrumSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dense_max_sites: int = Field(4096, description="Largest K^d counted by full eigendecomposition")
    tie_epsilon: float = Field(1e-12, description="Relative tie guard for eigenvalue counting")
    shift_retries: int = Field(3, description="Retries of a breaking-down shifted factorization")


class BoxcountSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fit_c2_min: float = 0.1
    fit_c2_max: float = 10.0
    fit_c2_points: int = 60


class OracleSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kernel_caps: Dict[int, int] = Field(
        default_factory=lambda: {1: 4096, 2: 24, 3: 8},
        description="Largest cube radius r per dimension for kernel construction",
    )
    subsolution_tol: float = Field(1e-11, description="Per-site slack for sub/super-solution checks")


class EnsembleSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    workers: int = Field(4, description="Default worker pool size")
    tail_min_points: int = Field(5, ge=2, description="Fewest usable grid points a Lifschitz fit accepts")
    tail_min_coverage: float = Field(
        0.5, gt=0, le=1, description="Smallest share of the window log-width the usable points must span"
    )


class OutputSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Path = Field(default=PROJECT_ROOT / "artifacts", description="Default artifact directory")
    significant_digits: int = 17


class LoggingSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    level: str = "INFO"


class AppConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    solver: SolverSettings = Field(default_factory=SolverSettings)
    spectrum: SpectrumSettings = Field(default_factory=SpectrumSettings)
    boxcount: BoxcountSettings = Field(default_factory=BoxcountSettings)
    oracles: OracleSettings = Field(default_factory=OracleSettings)
    ensemble: EnsembleSettings = Field(default_factory=EnsembleSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)


def format_validation_error(exc: ValidationError, prefix: str = "") -> str:
    """Render pydantic errors as `path.to.key: message` lines."""
    lines = []
    for err in exc.errors():
        path = ".".join(str(part) for part in err["loc"])
        if prefix:
            path = f"{prefix}.{path}" if path else prefix
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


class Config:
    _instance = None
    _lock = threading.Lock()
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            with self._lock:
                if not self._initialized:
                    self._config = None
                    self._load_initial_config()
                    self._initialized = True

    @staticmethod
    def _get_config_path() -> Optional[Path]:
        root = PROJECT_ROOT
        config_path = root / "config" / "config.toml"
        if config_path.exists():
            return config_path
        example_path = root / "config" / "config.example.toml"
        if example_path.exists():
            return example_path
        return None

    def _load_config(self) -> dict:
        config_path = self._get_config_path()
        if config_path is None:
            # 設定ファイルが無い場合はデフォルト値で動かす
            return {}
        with config_path.open("rb") as f:
            return tomllib.load(f)

    def _load_initial_config(self):
        raw_config = self._load_config()
        output = dict(raw_config.get("output", {}))
        if "directory" in output:
            directory = Path(output["directory"])
            output["directory"] = directory if directory.is_absolute() else PROJECT_ROOT / directory
        raw_config = {**raw_config, "output": output}
        try:
            self._config = AppConfig(**raw_config)
        except ValidationError as e:
            raise ConfigError(format_validation_error(e, prefix="config")) from e

    @property
    def solver(self) -> SolverSettings:
        return self._config.solver

    @property
    def spectrum(self) -> SpectrumSettings:
        return self._config.spectrum

    @property
    def boxcount(self) -> BoxcountSettings:
        return self._config.boxcount

    @property
    def oracles(self) -> OracleSettings:
        return self._config.oracles

    @property
    def ensemble(self) -> EnsembleSettings:
        return self._config.ensemble

    @property
    def output(self) -> OutputSettings:
        return self._config.output

    @property
    def logging(self) -> LoggingSettings:
        return self._config.logging

    def get_output_path(self, directory: Path = None) -> Path:
        """
        成果物の出力先ディレクトリを返す（必要なら作成する）

        Args:
            directory: 明示的な出力先。None の場合は設定のデフォルト

        Returns:
            出力先ディレクトリのパス
        """
        path = Path(directory) if directory else self.output.directory
        path.mkdir(parents=True, exist_ok=True)
        return path


config = Config()
