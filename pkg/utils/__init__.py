"""
Módulo de utilidades para MongeFlux.

Proporciona funciones auxiliares para manejo de archivos de resultados,
configuración de ejecuciones y validación.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from .file_utils import (
    ensure_directory_exists,
    get_project_root,
    get_output_directory,
    create_run_directory,
    format_value,
    write_summary,
    read_summary,
    write_csv,
)

from .config_utils import (
    DomainConfig,
    GridConfig,
    DataConfig,
    SolverConfig,
    DiagnosticsConfig,
    EnergyConfig,
    CompactnessConfig,
    PogorelovConfig,
    SystemConfig,
    RunConfig,
    get_default_config,
    load_config_from_file as load_config,
    save_config_to_file as save_config,
    get_runtime_config,
    merge_configs,
    get_global_config,
    set_global_config,
)

from .validation_utils import (
    MongeFluxError,
    DataValidationError,
    SolverDivergenceError,
    ConditioningError,
    PreconditionError,
    ValidationResult,
    ValidationReport,
    validate_csv_file,
)

# Versión del módulo
__version__ = "1.0.0"

__all__ = [
    # File utilities
    "ensure_directory_exists",
    "get_project_root",
    "get_output_directory",
    "create_run_directory",
    "format_value",
    "write_summary",
    "read_summary",
    "write_csv",

    # Config utilities
    "DomainConfig",
    "GridConfig",
    "DataConfig",
    "SolverConfig",
    "DiagnosticsConfig",
    "EnergyConfig",
    "CompactnessConfig",
    "PogorelovConfig",
    "SystemConfig",
    "RunConfig",
    "get_default_config",
    "load_config",
    "save_config",
    "get_runtime_config",
    "merge_configs",
    "get_global_config",
    "set_global_config",

    # Validation utilities
    "MongeFluxError",
    "DataValidationError",
    "SolverDivergenceError",
    "ConditioningError",
    "PreconditionError",
    "ValidationResult",
    "ValidationReport",
    "validate_csv_file",
]
