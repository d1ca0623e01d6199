"""Logging setup: console plus a rotating file under the log directory."""

import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from .config import settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE_NAME = "gzk_lab.log"
MAX_LOG_BYTES = 5 * 1024 * 1024

_configured = False


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None) -> None:
    """
    Configure the root logger once per process.

    Args:
        level: Log level name (defaults to settings.log_level)
        log_dir: Directory for the rotating log file (defaults to settings.log_dir)
    """
    global _configured
    root = logging.getLogger()
    root.setLevel((level or settings.log_level).upper())
    if _configured:
        return

    formatter = logging.Formatter(LOG_FORMAT)

    console = logging.StreamHandler()
    console.setFormatter(formatter)
    root.addHandler(console)

    if settings.log_to_file:
        directory = Path(log_dir or settings.log_dir)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            file_handler = logging.handlers.RotatingFileHandler(
                directory / LOG_FILE_NAME, maxBytes=MAX_LOG_BYTES, backupCount=3
            )
            file_handler.setFormatter(formatter)
            root.addHandler(file_handler)
        except OSError as e:
            root.warning(f"File logging disabled, cannot write to {directory}: {e}")

    _configured = True
