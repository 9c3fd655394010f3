"""
Utilidades de validación para MongeFlux.

Define la jerarquía de excepciones del proyecto, los resultados de
verificación individuales y el reporte agregado que usa el subcomando
``verify``, además de la validación de archivos CSV tabulados.

Autor: MongeFlux Team
Versión: 1.0.0
"""

import datetime
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

# Columnas requeridas en campos tabulados
CSV_REQUIRED_COLUMNS = ["node", "value"]

VALID_SEVERITIES = ["info", "warning", "error", "critical"]


class MongeFluxError(Exception):
    """Error base de MongeFlux."""


class DataValidationError(MongeFluxError):
    """
    Violación de cotas o de signo en los datos del problema.

    Attributes:
        field_name: Campo que viola la cota (f, sigma, A)
        node: Índice del nodo infractor
        value: Valor encontrado
    """

    def __init__(self, message: str, field_name: str = "",
                 node: Optional[int] = None, value: Optional[float] = None) -> None:
        super().__init__(message)
        self.field_name = field_name
        self.node = node
        self.value = value


class SolverDivergenceError(MongeFluxError):
    """
    El método de Newton no alcanzó la tolerancia.

    Attributes:
        history: Historia de normas del residuo por iteración
    """

    def __init__(self, message: str, history: Optional[Sequence[float]] = None) -> None:
        super().__init__(message)
        self.history = list(history or [])


class ConditioningError(MongeFluxError):
    """
    Sistema lineal singular, mal condicionado o con filas no monótonas.

    Attributes:
        diagnostics: Diccionario con diagnósticos de condicionamiento
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PreconditionError(MongeFluxError):
    """Precondición de una operación no satisfecha (datos inestables, F inválida...)."""


@dataclass
class ValidationResult:
    """
    Resultado de una verificación individual.

    Attributes:
        name: Nombre de la verificación
        passed: Si la verificación pasó
        message: Mensaje descriptivo del resultado
        value: Valor medido (opcional)
        threshold: Umbral contra el que se comparó (opcional)
        severity: Nivel de severidad (info, warning, error, critical)
    """
    name: str
    passed: bool
    message: str
    value: Optional[float] = None
    threshold: Optional[float] = None
    severity: str = "info"

    def __post_init__(self) -> None:
        """Valida los valores después de la inicialización."""
        if self.severity not in VALID_SEVERITIES:
            self.severity = "error" if not self.passed else "info"


@dataclass
class ValidationReport:
    """
    Reporte agregado de verificaciones.

    Attributes:
        results: Lista de resultados de verificación
        overall_status: Estado general (passed/failed/warning)
        summary: Conteos por estado
        timestamp: Marca de tiempo del reporte (no se escribe en resúmenes)
    """
    results: List[ValidationResult] = field(default_factory=list)
    overall_status: str = "unknown"
    summary: Dict[str, int] = field(default_factory=dict)
    timestamp: Optional[str] = None

    def __post_init__(self) -> None:
        """Calcula el estado general y resumen."""
        self._calculate_summary()
        self._determine_overall_status()
        if self.timestamp is None:
            self.timestamp = datetime.datetime.now().isoformat()

    def _calculate_summary(self) -> None:
        """Calcula el resumen de resultados."""
        self.summary = {
            "total": len(self.results),
            "passed": sum(1 for r in self.results if r.passed),
            "failed": sum(1 for r in self.results if not r.passed),
            "errors": sum(1 for r in self.results if not r.passed and r.severity in ("error", "critical")),
            "warnings": sum(1 for r in self.results if not r.passed and r.severity == "warning"),
        }

    def _determine_overall_status(self) -> None:
        """Determina el estado general basado en los resultados."""
        if self.summary.get("errors", 0) > 0:
            self.overall_status = "failed"
        elif self.summary.get("warnings", 0) > 0:
            self.overall_status = "warning"
        else:
            self.overall_status = "passed"

    @property
    def passed(self) -> bool:
        """True si ninguna verificación de severidad error falló."""
        return self.overall_status != "failed"

    def add_result(self, result: ValidationResult) -> None:
        """
        Añade un resultado de verificación.

        Args:
            result: Resultado a añadir
        """
        self.results.append(result)
        self._calculate_summary()
        self._determine_overall_status()

    def add_check(self, name: str, value: float, threshold: float,
                  upper: bool = True, severity: str = "error") -> ValidationResult:
        """
        Añade una verificación numérica contra un umbral.

        Args:
            name: Nombre de la verificación
            value: Valor medido
            threshold: Umbral
            upper: Si True exige value <= threshold, si False value >= threshold
            severity: Severidad en caso de fallo

        Returns:
            ValidationResult: Resultado añadido
        """
        ok = bool(np.isfinite(value)) and (value <= threshold if upper else value >= threshold)
        op = "<=" if upper else ">="
        result = ValidationResult(
            name=name,
            passed=ok,
            message=f"{name} = {value:.6g} ({op} {threshold:.6g})",
            value=float(value),
            threshold=float(threshold),
            severity=severity,
        )
        self.add_result(result)
        return result

    def get_failed_results(self) -> List[ValidationResult]:
        """
        Obtiene solo los resultados fallidos.

        Returns:
            List[ValidationResult]: Resultados fallidos
        """
        return [r for r in self.results if not r.passed]

    def to_frame(self) -> pd.DataFrame:
        """
        Convierte el reporte a tabla.

        Returns:
            pd.DataFrame: Una fila por verificación
        """
        return pd.DataFrame([
            {
                "name": r.name,
                "passed": r.passed,
                "value": r.value,
                "threshold": r.threshold,
                "severity": r.severity,
                "message": r.message,
            }
            for r in self.results
        ], columns=["name", "passed", "value", "threshold", "severity", "message"])


def validate_csv_file(file_path: Union[str, Path], n_expected: Optional[int] = None) -> pd.DataFrame:
    """
    Valida y carga un campo tabulado en CSV con columnas (node, value).

    Args:
        file_path: Ruta del archivo CSV
        n_expected: Número de nodos esperado (opcional)

    Returns:
        pd.DataFrame: Tabla ordenada por nodo

    Raises:
        ValueError: Si el archivo no existe, faltan columnas o hay valores no numéricos
    """
    path = Path(file_path)
    if not path.exists():
        raise ValueError(f"Archivo CSV no encontrado: {path}")

    frame = pd.read_csv(path)
    missing = [c for c in CSV_REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"Columnas faltantes en {path.name}: {missing}")

    values = pd.to_numeric(frame["value"], errors="coerce")
    nodes = pd.to_numeric(frame["node"], errors="coerce")
    if values.isna().any() or nodes.isna().any():
        bad = int(np.flatnonzero((values.isna() | nodes.isna()).to_numpy())[0]) + 2
        raise ValueError(f"Valor no numérico en {path.name}, fila {bad}")

    frame = pd.DataFrame({"node": nodes.astype(int), "value": values.astype(float)})
    frame = frame.sort_values("node").reset_index(drop=True)
    if n_expected is not None and len(frame) != n_expected:
        raise ValueError(
            f"{path.name} tiene {len(frame)} nodos, se esperaban {n_expected}"
        )
    return frame
