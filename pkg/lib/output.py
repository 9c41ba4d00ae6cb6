"""CSV and JSON artifacts with a reproducibility header."""

import hashlib
import json
import logging
from datetime import datetime
from enum import Enum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

import thermo

logger = logging.getLogger(__name__)

TOOL_NAME = "thermo-scope"
FLOAT_FORMAT = "%.17g"


def tool_version() -> str:
    try:
        return version(TOOL_NAME)
    except PackageNotFoundError:
        return thermo.__version__


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy and enum values into JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON of the effective config."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def build_header(command: str, config: dict, seed: int, parameters: dict | None = None) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": tool_version(),
        "command": command,
        "config_sha256": config_hash(config),
        "seed": seed,
        "config": to_jsonable(config),
        "parameters": to_jsonable(parameters or {}),
        "generated": datetime.now().isoformat(timespec="seconds"),
    }


def write_csv(path: Path, header: dict, frame: pd.DataFrame) -> Path:
    """Header as '# key: value' lines, then the table at full float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in header.items():
        text = value if isinstance(value, str) else canonical_json(value)
        lines.append(f"# {key}: {text}\n")
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text("".join(lines) + body)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(path: Path, header: dict, body: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"header": to_jsonable(header), "body": to_jsonable(body)}
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def read_body(path: Path) -> str:
    """Artifact text without its header, the part that must be reproducible."""
    path = Path(path)
    if path.suffix == ".json":
        document = json.loads(path.read_text())
        return json.dumps(document["body"], sort_keys=True, indent=2)
    return "".join(
        line for line in path.read_text().splitlines(keepends=True) if not line.startswith("# ")
    )
