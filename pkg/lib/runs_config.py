"""
Runs configuration module for thermo-scope.

Provides centralized configuration for experiment output location with support for:
- Default location: ~/.thermo-scope/runs
- Environment variable override: THERMO_SCOPE_RUNS_DIR
- Bundled model presets under thermo/presets
"""

import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

# Default runs directory
DEFAULT_RUNS_DIR = "~/.thermo-scope/runs"

# Environment variable for overriding runs directory
RUNS_DIR_ENV_VAR = "THERMO_SCOPE_RUNS_DIR"

PRESETS_DIR = Path(__file__).resolve().parent.parent / "thermo" / "presets"


def resolve_dir(env_var: str, default: str) -> Path:
    """Absolute directory from env_var if set and non-empty, else from default."""
    return Path(os.environ.get(env_var) or default).expanduser().resolve()


def get_runs_dir() -> Path:
    """
    Get the runs directory path.

    Priority order:
    1. THERMO_SCOPE_RUNS_DIR environment variable
    2. Default: ~/.thermo-scope/runs

    Returns:
        Path: Absolute path to the runs directory
    """
    return resolve_dir(RUNS_DIR_ENV_VAR, DEFAULT_RUNS_DIR)


def ensure_runs_dir(override: str | Path | None = None) -> Path:
    """
    Get the runs directory path and ensure it exists.

    Args:
        override: Directory given on the command line; takes precedence

    Returns:
        Path: Absolute path to the runs directory
    """
    runs_dir = Path(override).expanduser().resolve() if override else get_runs_dir()
    runs_dir.mkdir(parents=True, exist_ok=True)
    return runs_dir


def list_presets() -> list[str]:
    """Names of the bundled model presets."""
    if not PRESETS_DIR.exists():
        return []
    return sorted(p.stem for p in PRESETS_DIR.glob("*.yaml"))


def get_preset_path(name: str) -> Path | None:
    """
    Resolve a model reference to a config file.

    A bundled preset name wins over a file path of the same name.

    Args:
        name: Preset name (e.g. "curie_weiss") or path to a YAML/JSON file

    Returns:
        Path | None: The resolved file, or None if neither exists
    """
    preset = PRESETS_DIR / f"{name}.yaml"
    if preset.exists():
        return preset

    candidate = Path(name).expanduser()
    if candidate.is_file():
        return candidate.resolve()

    logger.debug(f"No preset or file named {name!r}")
    return None
