import os
import sys
import time
from pathlib import Path

from loguru import logger as _logger

from app.config import PROJECT_ROOT, config


_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} - {message}"


def _resolve_log_file() -> Path:
    # 環境変数でログファイルが指定されていればそれを使う
    log_file = os.environ.get("LANDSCAPE_LOG_FILE")
    if log_file:
        return Path(log_file)

    logs_dir = PROJECT_ROOT / "logs"
    logs_dir.mkdir(exist_ok=True)

    run_id = os.environ.get("LANDSCAPE_RUN_ID", "")
    if not run_id:
        run_id = str(int(time.time()))
    if not run_id.startswith("run_"):
        run_id = f"run_{run_id}"
    return logs_dir / f"{run_id}.log"


def define_log_level(print_level: str = "INFO", logfile_level: str = "DEBUG"):
    """Install the console and file sinks at the given levels."""
    _logger.remove()
    _logger.add(sys.stderr, format=_FORMAT, level=print_level)
    _logger.add(
        _resolve_log_file(),
        format=_FORMAT,
        level=logfile_level,
        rotation="100 MB",
        retention="10 days",
    )
    return _logger


logger = define_log_level(config.logging.level)

__all__ = ["logger", "define_log_level"]
