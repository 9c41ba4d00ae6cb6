"""
Session logging for thermo-scope.

Every CLI run writes to its own file under ~/.thermo-scope/logs (or
THERMO_SCOPE_LOGS_DIR), named after the command and the start time.
"""

import logging
import os
from datetime import datetime, timedelta
from logging.handlers import RotatingFileHandler
from pathlib import Path

from .runs_config import resolve_dir

logger = logging.getLogger(__name__)

DEFAULT_LOGS_DIR = "~/.thermo-scope/logs"
LOGS_DIR_ENV_VAR = "THERMO_SCOPE_LOGS_DIR"

LOG_FILE_PREFIX = "thermo-scope-"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_MAX_BYTES = 5 * 1024 * 1024
LOG_BACKUPS = 5

PACKAGE_LOGGERS = ("app", "lib", "thermo")


def get_logs_dir() -> Path:
    """Logs directory: THERMO_SCOPE_LOGS_DIR if set, else ~/.thermo-scope/logs."""
    return resolve_dir(LOGS_DIR_ENV_VAR, DEFAULT_LOGS_DIR)


def get_current_log_file(command: str = "run") -> Path:
    """
    Session log path for one command invocation.

    Args:
        command: CLI command name, embedded in the file name

    Returns:
        Path: <logs>/thermo-scope-<command>-YYYY-MM-DD-HH-MM-SS.log
    """
    started = datetime.now().strftime("%Y-%m-%d-%H-%M-%S")
    return get_logs_dir() / f"{LOG_FILE_PREFIX}{command}-{started}.log"


def cleanup_old_logs(max_age_days: int = 1) -> None:
    """
    Delete session logs, rotated backups included, not modified in max_age_days.

    Failures are logged and skipped.
    """
    logs_dir = get_logs_dir()
    if not logs_dir.exists():
        return

    cutoff = (datetime.now() - timedelta(days=max_age_days)).timestamp()
    removed = 0
    for path in logs_dir.glob(f"{LOG_FILE_PREFIX}*.log*"):
        try:
            if path.stat().st_mtime < cutoff:
                path.unlink()
                removed += 1
        except OSError as e:
            logger.warning(f"Failed to delete old log file {path}: {e}")

    if removed:
        logger.info(f"Cleaned up {removed} old log file(s) older than {max_age_days} day(s)")


def configure_logging(command: str, verbose: bool = False) -> Path:
    """
    Set up console and rotating file logging for one CLI run.

    Root stays at WARNING. The app's own packages log at INFO, or DEBUG with
    --verbose or VERBOSE_LOGGING.

    Returns:
        Path: The log file for this run
    """
    get_logs_dir().mkdir(parents=True, exist_ok=True)
    cleanup_old_logs(max_age_days=1)
    log_file = get_current_log_file(command)

    level = logging.DEBUG if verbose or os.getenv("VERBOSE_LOGGING") else logging.INFO
    formatter = logging.Formatter(LOG_FORMAT)

    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(formatter)

    file_handler = RotatingFileHandler(log_file, maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUPS)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.WARNING)
    root_logger.addHandler(console)
    root_logger.addHandler(file_handler)
    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(level)

    return log_file
