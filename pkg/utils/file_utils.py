"""
Utilidades para manejo de archivos y directorios de ejecución.

Proporciona funciones para crear directorios de resultados, escribir
tablas CSV con precisión completa y resúmenes deterministas en formato
clave=valor.

Autor: MongeFlux Team
Versión: 1.0.0
"""

import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import pandas as pd

# Constantes del módulo
OUTPUT_ENV_VAR = "MONGEFLUX_OUTPUT_DIR"
DEFAULT_OUTPUT_DIRNAME = "runs"
CSV_FLOAT_FORMAT = "%.17g"
SUMMARY_FILENAME = "summary.txt"


def ensure_directory_exists(directory_path: Union[str, Path]) -> Path:
    """
    Asegura que un directorio exista, creándolo si es necesario.

    Args:
        directory_path: Ruta del directorio a crear

    Returns:
        Path: Objeto Path del directorio creado

    Raises:
        OSError: Si no se puede crear el directorio
    """
    try:
        path = Path(directory_path)
        path.mkdir(parents=True, exist_ok=True)
        return path
    except OSError as e:
        raise OSError(f"No se pudo crear el directorio {directory_path}: {e}") from e


def get_project_root() -> Path:
    """
    Obtiene la ruta raíz del proyecto.

    Busca desde la ubicación actual hacia arriba hasta encontrar
    archivos característicos del proyecto.

    Returns:
        Path: Ruta raíz del proyecto
    """
    current_file = Path(__file__)
    project_root = current_file.parent.parent

    if (project_root / "app.py").exists() or (project_root / "setup.py").exists():
        return project_root

    for parent in current_file.parents:
        if (parent / "app.py").exists() or (parent / "setup.py").exists():
            return parent

    return project_root


def get_output_directory(configured: Optional[Union[str, Path]] = None) -> Path:
    """
    Resuelve el directorio base de resultados.

    La variable de entorno MONGEFLUX_OUTPUT_DIR tiene prioridad sobre
    el valor configurado; sin ninguno de los dos se usa ``runs/`` en la
    raíz del proyecto.

    Args:
        configured: Directorio indicado en la configuración (opcional)

    Returns:
        Path: Directorio base de resultados (sin crear)
    """
    env_value = os.getenv(OUTPUT_ENV_VAR)
    if env_value:
        return Path(env_value)
    if configured:
        return Path(configured)
    return get_project_root() / DEFAULT_OUTPUT_DIRNAME


def create_run_directory(base_dir: Union[str, Path], run_name: str) -> Path:
    """
    Crea el directorio de una ejecución dentro del directorio base.

    Args:
        base_dir: Directorio base de resultados
        run_name: Nombre de la ejecución (subcomando + nombre de config)

    Returns:
        Path: Directorio de la ejecución

    Raises:
        OSError: Si el directorio no se puede crear o no es escribible
    """
    run_dir = ensure_directory_exists(Path(base_dir) / run_name)
    if not os.access(run_dir, os.W_OK):
        raise OSError(f"El directorio de salida no es escribible: {run_dir}")
    return run_dir


def format_value(value: Any) -> str:
    """
    Formatea un valor escalar para el resumen clave=valor.

    Los flotantes se escriben con 17 cifras significativas para que
    dos ejecuciones idénticas produzcan archivos idénticos byte a byte.

    Args:
        value: Valor a formatear

    Returns:
        str: Representación textual
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def write_summary(summary: Mapping[str, Any], path: Union[str, Path]) -> Path:
    """
    Escribe un resumen plano clave=valor con claves ordenadas.

    Args:
        summary: Diccionario de métricas escalares
        path: Archivo de destino

    Returns:
        Path: Ruta del archivo escrito

    Raises:
        OSError: Si hay problemas de acceso al archivo
    """
    target = Path(path)
    ensure_directory_exists(target.parent)
    lines = [f"{key}={format_value(summary[key])}" for key in sorted(summary)]
    try:
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except (OSError, IOError) as e:
        raise OSError(f"Error al escribir el resumen {target}: {e}") from e
    return target


def read_summary(path: Union[str, Path]) -> Dict[str, str]:
    """
    Lee un resumen clave=valor.

    Args:
        path: Archivo de resumen

    Returns:
        Dict[str, str]: Pares clave/valor como texto
    """
    result: Dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            result[key.strip()] = value.strip()
    return result


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Escribe una tabla CSV con precisión completa.

    Args:
        frame: Tabla a escribir
        path: Archivo de destino

    Returns:
        Path: Ruta del archivo escrito

    Raises:
        OSError: Si hay problemas de acceso al archivo
    """
    target = Path(path)
    ensure_directory_exists(target.parent)
    try:
        frame.to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT)
    except (OSError, IOError) as e:
        raise OSError(f"Error al escribir CSV {target}: {e}") from e
    return target
