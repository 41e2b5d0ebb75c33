"""Artifact writers and the embedded configuration header."""

import json
from pathlib import Path

import numpy as np
import pytest

from app.utils.artifacts import (
    FORMAT_TAG,
    format_number,
    read_header_config,
    write_csv,
    write_json,
)
from app.utils.errors import ConfigError

CONFIG = ["[params]", "g_dob = 1000.0", "[grid]", "points = 10"]


def test_format_number() -> None:
    assert format_number(0.1) == "0.10000000000000001"
    assert float(format_number(1 / 3)) == 1 / 3
    assert format_number(np.float64(2.5)) == "2.5"
    assert format_number(True) == "true"
    assert format_number(None) == ""
    assert format_number(7) == "7"


def test_csv_layout(tmp_path: Path) -> None:
    path = write_csv(
        tmp_path / "sub" / "run.csv",
        "freq",
        CONFIG,
        ["a", "b"],
        [(1.0, 2), (0.5, 3)],
        results={"peak": 1.25},
    )
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == f"# {FORMAT_TAG} (freq)"
    assert "# ---" in lines
    assert "# peak = 1.25" in lines
    assert lines[-3:] == ["a,b", "1,2", "0.5,3"]


def test_header_round_trip(tmp_path: Path) -> None:
    csv_path = write_csv(tmp_path / "run.csv", "freq", CONFIG, ["a"], [(1.0,)])
    json_path = write_json(tmp_path / "run.json", "bode", CONFIG, {"value": 1j})
    assert read_header_config(csv_path) == "\n".join(CONFIG)
    assert read_header_config(json_path) == "\n".join(CONFIG)
    document = json.loads(json_path.read_text())
    assert document["value"] == [0.0, 1.0]
    assert document["_header"]["command"] == "bode"


def test_foreign_files_are_rejected(tmp_path: Path) -> None:
    plain = tmp_path / "plain.csv"
    plain.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        read_header_config(plain)
    other = tmp_path / "other.json"
    other.write_text('{"value": 1}')
    with pytest.raises(ConfigError):
        read_header_config(other)
