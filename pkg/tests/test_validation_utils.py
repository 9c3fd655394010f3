"""Pruebas de errores y reportes de validación."""

import numpy as np
import pandas as pd
import pytest

from utils.validation_utils import (
    ConditioningError,
    DataValidationError,
    MongeFluxError,
    PreconditionError,
    SolverDivergenceError,
    ValidationReport,
    ValidationResult,
    validate_csv_file,
)


def test_error_hierarchy_carries_context():
    error = DataValidationError("f negativa", field_name="f", node=3, value=-1.0)
    assert isinstance(error, MongeFluxError)
    assert (error.field_name, error.node, error.value) == ("f", 3, -1.0)
    assert SolverDivergenceError("x", history=[1.0, 0.5]).history == [1.0, 0.5]
    assert ConditioningError("x").diagnostics == {}
    assert issubclass(PreconditionError, MongeFluxError)


def test_report_status_follows_severity():
    report = ValidationReport()
    assert report.passed
    report.add_check("gap", 0.1, 1.0)
    report.add_check("sections", 2.0, 0.0, severity="warning")
    assert report.overall_status == "warning"
    assert report.passed
    report.add_check("c_min", 0.01, 0.1, upper=False)
    assert report.overall_status == "failed"
    assert not report.passed
    assert report.summary == {"total": 3, "passed": 1, "failed": 2, "errors": 1, "warnings": 1}


def test_non_finite_value_fails():
    report = ValidationReport()
    result = report.add_check("el_test_max", float("nan"), 5e-2)
    assert not result.passed


def test_invalid_severity_is_normalized():
    assert ValidationResult("x", passed=False, message="", severity="bogus").severity == "error"
    assert ValidationResult("x", passed=True, message="", severity="bogus").severity == "info"


def test_report_frame_has_one_row_per_check():
    report = ValidationReport()
    report.add_check("a", 1.0, 2.0)
    report.add_check("b", 3.0, 2.0)
    frame = report.to_frame()
    assert list(frame["name"]) == ["a", "b"]
    assert list(frame["passed"]) == [True, False]
    assert [r.name for r in report.get_failed_results()] == ["b"]


def test_csv_field_is_sorted_by_node(tmp_path):
    path = tmp_path / "A.csv"
    pd.DataFrame({"node": [2, 0, 1], "value": [3.0, 1.0, 2.0]}).to_csv(path, index=False)
    frame = validate_csv_file(path, n_expected=3)
    np.testing.assert_array_equal(frame["value"].to_numpy(), [1.0, 2.0, 3.0])


def test_csv_field_errors(tmp_path):
    with pytest.raises(ValueError, match="no encontrado"):
        validate_csv_file(tmp_path / "missing.csv")

    no_value = tmp_path / "cols.csv"
    no_value.write_text("node,val\n0,1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="Columnas faltantes"):
        validate_csv_file(no_value)

    text = tmp_path / "text.csv"
    text.write_text("node,value\n0,1\n1,abc\n", encoding="utf-8")
    with pytest.raises(ValueError, match="fila 3"):
        validate_csv_file(text)

    short = tmp_path / "short.csv"
    short.write_text("node,value\n0,1\n", encoding="utf-8")
    with pytest.raises(ValueError, match="se esperaban 2"):
        validate_csv_file(short, n_expected=2)
