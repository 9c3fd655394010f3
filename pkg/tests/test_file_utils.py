"""Pruebas de los utilitarios de archivos y resúmenes."""

import numpy as np
import pandas as pd
import pytest

from utils.file_utils import (
    OUTPUT_ENV_VAR,
    create_run_directory,
    format_value,
    get_output_directory,
    read_summary,
    write_csv,
    write_summary,
)


@pytest.mark.parametrize("value, expected", [
    (True, "true"),
    (np.bool_(False), "false"),
    (3, "3"),
    (np.int64(7), "7"),
    (0.1, "0.10000000000000001"),
    ([1, 2.5], "1,2.5"),
    ("stable", "stable"),
])
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_summary_is_sorted_and_readable(tmp_path):
    path = write_summary({"b": 1.5, "a": True, "c": "x"}, tmp_path / "summary.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["a=true", "b=1.5", "c=x"]
    assert read_summary(path) == {"a": "true", "b": "1.5", "c": "x"}


def test_summary_is_deterministic(tmp_path):
    summary = {"L_value": np.pi, "mu_hat": 1.0 / 3.0}
    first = write_summary(summary, tmp_path / "one.txt").read_bytes()
    second = write_summary(dict(reversed(list(summary.items()))), tmp_path / "two.txt").read_bytes()
    assert first == second


def test_csv_keeps_full_precision(tmp_path):
    frame = pd.DataFrame({"x": [1.0 / 3.0, np.pi]})
    path = write_csv(frame, tmp_path / "sub" / "table.csv")
    loaded = pd.read_csv(path)
    np.testing.assert_array_equal(loaded["x"].to_numpy(), frame["x"].to_numpy())


def test_output_directory_priority(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV_VAR, raising=False)
    assert get_output_directory(tmp_path / "cfg") == tmp_path / "cfg"
    assert get_output_directory().name == "runs"
    monkeypatch.setenv(OUTPUT_ENV_VAR, str(tmp_path / "env"))
    assert get_output_directory(tmp_path / "cfg") == tmp_path / "env"


def test_run_directory_is_created(tmp_path):
    run_dir = create_run_directory(tmp_path, "solve-canonical")
    assert run_dir.is_dir()
    assert run_dir.parent == tmp_path
