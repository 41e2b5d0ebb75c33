"""CSV/JSON artifact writers and the config header that makes them re-runnable.

Every artifact carries the resolved configuration that produced it: CSV files
as ``#`` comment lines above the header row, JSON files under a leading
``_header`` key. :func:`read_header_config` recovers that configuration so an
artifact can be passed straight back to ``--config``.
"""

import csv
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

FORMAT_TAG = "dob-bode format 1"
HEADER_END = "---"


def format_number(value: Any) -> str:
    """17 significant digits for floats, so values survive a text round trip."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    return value


def header_lines(
    command: str, config_lines: Sequence[str], results: Mapping[str, Any] | None = None
) -> list[str]:
    lines = [f"{FORMAT_TAG} ({command})", *config_lines, HEADER_END]
    for key, value in (results or {}).items():
        lines.append(f"{key} = {format_number(value)}")
    return lines


def write_csv(
    path: Path,
    command: str,
    config_lines: Sequence[str],
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    results: Mapping[str, Any] | None = None,
) -> Path:
    """Comma-separated, LF line endings, ``#`` header, one mandatory column row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        for line in header_lines(command, config_lines, results):
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    logger.info(f"wrote {path}")
    return path


def write_json(
    path: Path,
    command: str,
    config_lines: Sequence[str],
    payload: Mapping[str, Any],
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "_header": {
            "format": FORMAT_TAG,
            "command": command,
            "config": "\n".join(config_lines),
        },
        **_jsonable(payload),
    }
    text = json.dumps(document, indent=2, allow_nan=True)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"wrote {path}")
    return path


def read_header_config(path: Path) -> str:
    """INI text recorded in an artifact written by this package."""
    if path.suffix == ".json":
        document = json.loads(path.read_text(encoding="utf-8"))
        header = document.get("_header") if isinstance(document, dict) else None
        if not header or not str(header.get("format", "")).startswith(FORMAT_TAG):
            raise ConfigError(f"{path.name} has no {FORMAT_TAG} header")
        return str(header["config"])

    lines: list[str] = []
    with path.open(encoding="utf-8") as handle:
        first = handle.readline().rstrip("\n")
        if not first.startswith(f"# {FORMAT_TAG}"):
            raise ConfigError(f"{path.name} has no {FORMAT_TAG} header", line=1)
        for raw in handle:
            line = raw.rstrip("\n")
            if not line.startswith("# ") or line[2:] == HEADER_END:
                break
            lines.append(line[2:])
    return "\n".join(lines)
