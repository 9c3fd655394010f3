"""
Utilidades para manejo de configuración de ejecuciones.

Proporciona las clases de configuración de MongeFlux y funciones para
cargar, guardar y combinar configuraciones en formato TOML.

Autor: MongeFlux Team
Versión: 1.0.0
"""

import copy
import os
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import toml

from utils.file_utils import OUTPUT_ENV_VAR, ensure_directory_exists

# Constantes de configuración
DEFAULT_CONFIG_FILENAME = "config.toml"
EFFECTIVE_CONFIG_FILENAME = "effective_config.toml"
DEFAULT_GRID_N = 32
DEFAULT_BOUNDARY_M = 128
DEFAULT_MA_TOL = 1e-8
DEFAULT_NEWTON_ITERATIONS = 200

VALID_FIELD_KINDS = {
    "f": ["constant", "affine", "csv"],
    "sigma": ["constant", "fourier", "csv"],
    "A": ["constant", "bumps", "csv"],
}


@dataclass
class DomainConfig:
    """
    Configuración del dominio de cálculo.

    Attributes:
        kind: Tipo de dominio (disk o sampled)
        radius: Radio del disco
        center: Centro del disco
        boundary_samples: Puntos del borde para dominios muestreados (sentido antihorario)
    """
    kind: str = "disk"
    radius: float = 1.0
    center: List[float] = field(default_factory=lambda: [0.0, 0.0])
    boundary_samples: List[List[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        if self.kind not in ["disk", "sampled"]:
            raise ValueError(f"kind debe ser 'disk' o 'sampled', recibido: {self.kind}")

        if self.kind == "disk" and not self.radius > 0:
            raise ValueError(f"radius debe ser positivo, recibido: {self.radius}")

        if len(self.center) != 2:
            raise ValueError(f"center debe tener 2 componentes, recibido: {self.center}")

        if self.kind == "sampled" and len(self.boundary_samples) < 8:
            raise ValueError(
                f"boundary_samples requiere al menos 8 puntos, recibido: {len(self.boundary_samples)}"
            )


@dataclass
class GridConfig:
    """
    Configuración de la malla y las cuadraturas.

    Attributes:
        n: Número de celdas a lo largo del diámetro
        m: Nodos de cuadratura en el borde (par)
        n_radial: Nodos de Gauss radiales de la cuadratura de área
    """
    n: int = DEFAULT_GRID_N
    m: int = DEFAULT_BOUNDARY_M
    n_radial: int = 48

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        if not 8 <= self.n <= 1024:
            raise ValueError(f"n debe estar entre 8 y 1024, recibido: {self.n}")

        if self.m < 4 or self.m % 2 != 0:
            raise ValueError(f"m debe ser par y mayor o igual a 4, recibido: {self.m}")

        if not 4 <= self.n_radial <= 512:
            raise ValueError(f"n_radial debe estar entre 4 y 512, recibido: {self.n_radial}")


@dataclass
class DataConfig:
    """
    Configuración de los datos (f, sigma, A).

    Cada campo es una tabla con la clave ``kind`` y los parámetros de la
    familia correspondiente.

    Attributes:
        f: Familia del determinante prescrito
        sigma: Familia de la densidad de borde
        A: Familia de la densidad interior
        rho: Constante de cotas (None para inferirla)
        auto_balance: Si reequilibrar A automáticamente
        balance_tol: Tolerancia relativa del equilibrio de masas
    """
    f: Dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "value": 4.0})
    sigma: Dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    A: Dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "value": 2.0})
    rho: Optional[float] = None
    auto_balance: bool = False
    balance_tol: float = 1e-6

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        for name, params in (("f", self.f), ("sigma", self.sigma), ("A", self.A)):
            kind = params.get("kind")
            if kind not in VALID_FIELD_KINDS[name]:
                raise ValueError(
                    f"{name}.kind debe ser uno de {VALID_FIELD_KINDS[name]}, recibido: {kind}"
                )
            if kind == "csv" and not params.get("path"):
                raise ValueError(f"{name}.path es obligatorio para kind='csv'")

        if self.rho is not None and not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho debe estar en (0, 1], recibido: {self.rho}")

        if not 0.0 < self.balance_tol < 1.0:
            raise ValueError(f"balance_tol debe estar en (0, 1), recibido: {self.balance_tol}")


@dataclass
class SolverConfig:
    """
    Opciones de los solucionadores.

    Attributes:
        ma_tol: Tolerancia del residuo de Monge-Ampère (norma del supremo)
        max_newton_iterations: Iteraciones máximas de Newton
        min_damping: Amortiguamiento mínimo de la búsqueda lineal de Newton
        regularization: Cota inferior de las segundas diferencias en el esquema
        tol_el: Tolerancia relativa del residuo de Euler-Lagrange
        max_outer_iterations: Iteraciones máximas del descenso en el borde
        armijo: Factor de Armijo
        initial_step: Paso inicial
        min_step: Paso mínimo antes de declarar fallo de búsqueda lineal
        linear_tol: Tolerancia relativa de los sistemas lineales
        repairable_fraction: Fracción máxima de filas no monótonas reparables
        flux_filter: Si aplicar el filtro tangencial de 3 nodos al flujo
    """
    ma_tol: float = DEFAULT_MA_TOL
    max_newton_iterations: int = DEFAULT_NEWTON_ITERATIONS
    min_damping: float = 1e-4
    regularization: float = 1e-8
    tol_el: float = 1e-3
    max_outer_iterations: int = 200
    armijo: float = 1e-4
    initial_step: float = 1.0
    min_step: float = 1e-6
    linear_tol: float = 1e-10
    repairable_fraction: float = 0.05
    flux_filter: bool = False

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        for name in ("ma_tol", "tol_el", "armijo", "initial_step", "min_step",
                     "linear_tol", "regularization", "min_damping"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} debe ser positivo, recibido: {value}")

        if not 1 <= self.max_newton_iterations <= 10000:
            raise ValueError(
                f"max_newton_iterations debe estar entre 1 y 10000, recibido: {self.max_newton_iterations}"
            )

        if not 0 <= self.max_outer_iterations <= 100000:
            raise ValueError(
                f"max_outer_iterations debe estar entre 0 y 100000, recibido: {self.max_outer_iterations}"
            )

        if not self.armijo < 0.5:
            raise ValueError(f"armijo debe ser menor que 0.5, recibido: {self.armijo}")

        if not self.min_step <= self.initial_step:
            raise ValueError(
                f"min_step debe ser menor o igual que initial_step, recibido: {self.min_step}"
            )

        if not 0.0 <= self.repairable_fraction <= 1.0:
            raise ValueError(
                f"repairable_fraction debe estar entre 0 y 1, recibido: {self.repairable_fraction}"
            )


@dataclass
class DiagnosticsConfig:
    """
    Configuración de los diagnósticos y umbrales de ``verify``.

    Attributes:
        n_directions: Direcciones de pliegue muestreadas
        n_offsets: Desplazamientos de pliegue por dirección
        stability_tol: Umbral de mu_hat para declarar estabilidad
        chord_bracket: Intervalo aceptable para el funcional de cuerdas / h³
        h0: Semilongitud máxima de cuerda
        n_chords: Cuerdas usadas por la identidad de cuerdas
        section_height: Altura de las secciones interiores
        n_el_tests: Número de pruebas de Euler-Lagrange
        alexandrov_bound: Cota del cociente de Aleksandrov
        chord_gap_factor: Umbral de la identidad de cuerdas en múltiplos del paso
        el_threshold: Umbral de |L(phi)| normalizado
        separation_bounds: Cotas (c_min, C_max) de separación cuadrática
    """
    n_directions: int = 64
    n_offsets: int = 64
    stability_tol: float = 1e-6
    chord_bracket: List[float] = field(default_factory=lambda: [0.05, 20.0])
    h0: float = 0.3
    n_chords: int = 20
    section_height: float = 0.05
    n_el_tests: int = 20
    alexandrov_bound: float = 0.75
    chord_gap_factor: float = 10.0
    el_threshold: float = 5e-2
    separation_bounds: List[float] = field(default_factory=lambda: [0.1, 10.0])

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        if not 1 <= self.n_directions <= 4096:
            raise ValueError(f"n_directions debe estar entre 1 y 4096, recibido: {self.n_directions}")

        if not 1 <= self.n_offsets <= 4096:
            raise ValueError(f"n_offsets debe estar entre 1 y 4096, recibido: {self.n_offsets}")

        if len(self.chord_bracket) != 2 or not 0 <= self.chord_bracket[0] < self.chord_bracket[1]:
            raise ValueError(f"chord_bracket debe ser [lo, hi] con 0 <= lo < hi, recibido: {self.chord_bracket}")

        if len(self.separation_bounds) != 2 or not 0 <= self.separation_bounds[0] < self.separation_bounds[1]:
            raise ValueError(
                f"separation_bounds debe ser [lo, hi] con 0 <= lo < hi, recibido: {self.separation_bounds}"
            )

        for name in ("h0", "section_height", "alexandrov_bound", "chord_gap_factor",
                     "el_threshold", "stability_tol"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} debe ser positivo, recibido: {value}")

        if not 1 <= self.n_chords <= 1000:
            raise ValueError(f"n_chords debe estar entre 1 y 1000, recibido: {self.n_chords}")

        if not 1 <= self.n_el_tests <= 1000:
            raise ValueError(f"n_el_tests debe estar entre 1 y 1000, recibido: {self.n_el_tests}")


@dataclass
class EnergyConfig:
    """
    Configuración de la minimización de energía.

    Attributes:
        t0: Umbral de F (F = 0 en [t0, inf))
        t1_floor_ratio: Piso del recorte de f relativo a t0
        relaxation: Relajación de la actualización de f ante oscilaciones
        tol: Tolerancia del punto fijo
        max_iterations: Iteraciones externas máximas
        table_path: CSV opcional con columnas (t, F, dF)
    """
    t0: float = 10.0
    t1_floor_ratio: float = 0.01
    relaxation: float = 0.5
    tol: float = 1e-3
    max_iterations: int = 100
    table_path: Optional[str] = None

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        if not self.t0 > 0:
            raise ValueError(f"t0 debe ser positivo, recibido: {self.t0}")

        if not 0.0 < self.t1_floor_ratio < 1.0:
            raise ValueError(f"t1_floor_ratio debe estar en (0, 1), recibido: {self.t1_floor_ratio}")

        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError(f"relaxation debe estar en (0, 1], recibido: {self.relaxation}")

        if not self.tol > 0:
            raise ValueError(f"tol debe ser positivo, recibido: {self.tol}")

        if not 1 <= self.max_iterations <= 10000:
            raise ValueError(f"max_iterations debe estar entre 1 y 10000, recibido: {self.max_iterations}")


@dataclass
class CompactnessConfig:
    """
    Configuración del experimento de compacidad.

    Attributes:
        k_values: Índices de la sucesión
        perturbation: Campo perturbado (f o sigma)
        deltas: Distancias al borde de las bolas interiores
    """
    k_values: List[int] = field(default_factory=lambda: [1, 2, 4, 8])
    perturbation: str = "f"
    deltas: List[float] = field(default_factory=lambda: [0.1, 0.2])

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ValueError(f"k_values debe contener enteros positivos, recibido: {self.k_values}")

        if self.perturbation not in ["f", "sigma"]:
            raise ValueError(f"perturbation debe ser 'f' o 'sigma', recibido: {self.perturbation}")

        if not self.deltas or any(not 0 < d < 1 for d in self.deltas):
            raise ValueError(f"deltas debe contener valores en (0, 1), recibido: {self.deltas}")


@dataclass
class PogorelovConfig:
    """
    Configuración de la construcción singular en dimensión n.

    Attributes:
        n: Dimensión
        gamma: Exponente de v
        t_max: Extremo de integración del perfil
        K: Constante de truncamiento de psi
        delta: Parámetro de la variante uniformemente convexa
        n_samples: Puntos de muestreo de ``verify_system``
        n_quadratics: Formas cuadráticas aleatorias de la identidad de estabilidad
    """
    n: int = 3
    gamma: float = 0.5
    t_max: float = 0.75
    K: float = 10.0
    delta: float = 0.1
    n_samples: int = 50
    n_quadratics: int = 10

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        if self.n < 3:
            raise ValueError(f"n debe ser mayor o igual a 3, recibido: {self.n}")

        if not 0.0 < self.gamma < 2.0 / self.n:
            raise ValueError(f"gamma debe estar en (0, 2/n), recibido: {self.gamma}")

        if not self.t_max > 0:
            raise ValueError(f"t_max debe ser positivo, recibido: {self.t_max}")

        if not self.K > 0:
            raise ValueError(f"K debe ser positivo, recibido: {self.K}")

        if self.delta < 0:
            raise ValueError(f"delta debe ser no negativo, recibido: {self.delta}")


@dataclass
class SystemConfig:
    """
    Configuración general del sistema.

    Attributes:
        log_level: Nivel de logging
        n_jobs: Trabajos paralelos de joblib
        seed: Semilla de los muestreos aleatorios
        output_dir: Directorio base de resultados
    """
    log_level: str = "INFO"
    n_jobs: int = 1
    seed: int = 12345
    output_dir: Optional[str] = None

    def __post_init__(self) -> None:
        """Valida la configuración después de la inicialización."""
        self._validate_config()

    def _validate_config(self) -> None:
        """Valida los valores de configuración."""
        valid_log_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if self.log_level not in valid_log_levels:
            raise ValueError(f"log_level debe ser uno de {valid_log_levels}, recibido: {self.log_level}")

        if self.n_jobs == 0 or self.n_jobs < -1:
            raise ValueError(f"n_jobs debe ser positivo o -1, recibido: {self.n_jobs}")

        if self.seed < 0:
            raise ValueError(f"seed debe ser no negativa, recibido: {self.seed}")


@dataclass
class RunConfig:
    """
    Configuración completa de una ejecución.

    Attributes:
        name: Nombre de la ejecución (subdirectorio de resultados)
        domain: Configuración del dominio
        grid: Configuración de la malla
        data: Configuración de los datos
        solver: Opciones de los solucionadores
        diagnostics: Configuración de diagnósticos
        energy: Configuración de la energía
        compactness: Configuración del experimento de compacidad
        pogorelov: Configuración de la construcción singular
        system: Configuración del sistema
        version: Versión de configuración
    """
    name: str = "run"
    domain: DomainConfig = field(default_factory=DomainConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    data: DataConfig = field(default_factory=DataConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    compactness: CompactnessConfig = field(default_factory=CompactnessConfig)
    pogorelov: PogorelovConfig = field(default_factory=PogorelovConfig)
    system: SystemConfig = field(default_factory=SystemConfig)
    version: str = "1.0.0"

    def to_dict(self) -> Dict[str, Any]:
        """
        Convierte la configuración a diccionario.

        Returns:
            Dict[str, Any]: Configuración como diccionario
        """
        return _drop_none(asdict(self))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """
        Crea una configuración desde un diccionario.

        Args:
            data: Diccionario con datos de configuración

        Returns:
            RunConfig: Instancia de configuración

        Raises:
            ValueError: Si hay secciones o claves desconocidas
        """
        sections = {
            "domain": DomainConfig,
            "grid": GridConfig,
            "data": DataConfig,
            "solver": SolverConfig,
            "diagnostics": DiagnosticsConfig,
            "energy": EnergyConfig,
            "compactness": CompactnessConfig,
            "pogorelov": PogorelovConfig,
            "system": SystemConfig,
        }
        unknown = set(data) - set(sections) - {"name", "version"}
        if unknown:
            raise ValueError(f"Secciones de configuración desconocidas: {sorted(unknown)}")

        kwargs: Dict[str, Any] = {}
        for key, section_cls in sections.items():
            section_data = data.get(key, {})
            if not isinstance(section_data, dict):
                raise ValueError(f"La sección '{key}' debe ser una tabla")
            try:
                kwargs[key] = section_cls(**section_data)
            except TypeError as e:
                raise ValueError(f"Clave inválida en la sección '{key}': {e}") from e

        return cls(
            name=str(data.get("name", "run")),
            version=str(data.get("version", "1.0.0")),
            **kwargs,
        )

    def validate(self) -> bool:
        """
        Valida toda la configuración.

        Returns:
            bool: True si la configuración es válida

        Raises:
            ValueError: Si alguna configuración es inválida
        """
        self.domain._validate_config()
        self.grid._validate_config()
        self.data._validate_config()
        self.solver._validate_config()
        self.diagnostics._validate_config()
        self.energy._validate_config()
        self.compactness._validate_config()
        self.pogorelov._validate_config()
        self.system._validate_config()
        return True


def _drop_none(data: Any) -> Any:
    """TOML no representa None: las claves opcionales vacías se omiten."""
    if isinstance(data, dict):
        return {k: _drop_none(v) for k, v in data.items() if v is not None}
    if isinstance(data, list):
        return [_drop_none(v) for v in data]
    return data


def get_default_config() -> RunConfig:
    """
    Obtiene la configuración por defecto (caso canónico en el disco unidad).

    Returns:
        RunConfig: Configuración por defecto
    """
    return RunConfig()


def load_config_from_file(config_path: Union[str, Path]) -> RunConfig:
    """
    Carga la configuración desde un archivo TOML combinándola con los valores por defecto.

    Args:
        config_path: Ruta del archivo de configuración

    Returns:
        RunConfig: Configuración efectiva

    Raises:
        ValueError: Si el archivo no existe o es inválido
        OSError: Si hay problemas de acceso al archivo
    """
    config_file = Path(config_path)
    if not config_file.exists():
        raise ValueError(f"Archivo de configuración no encontrado: {config_file}")

    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            data = toml.load(f)
    except toml.TomlDecodeError as e:
        raise ValueError(f"Archivo de configuración TOML inválido: {e}") from e
    except (OSError, IOError) as e:
        raise OSError(f"Error al leer archivo de configuración: {e}") from e

    merged = _deep_merge_dicts(get_default_config().to_dict(), data)
    if "name" not in data:
        merged["name"] = config_file.stem

    # Las rutas CSV se resuelven respecto al archivo de configuración
    for key in ("f", "sigma", "A"):
        params = merged.get("data", {}).get(key, {})
        if params.get("kind") == "csv" and not Path(params["path"]).is_absolute():
            params["path"] = str((config_file.parent / params["path"]).resolve())
    table_path = merged.get("energy", {}).get("table_path")
    if table_path and not Path(table_path).is_absolute():
        merged["energy"]["table_path"] = str((config_file.parent / table_path).resolve())

    config = RunConfig.from_dict(merged)
    config.validate()
    return config


def save_config_to_file(config: RunConfig, config_path: Union[str, Path]) -> Path:
    """
    Guarda la configuración en un archivo TOML.

    Args:
        config: Configuración a guardar
        config_path: Ruta del archivo de configuración

    Returns:
        Path: Ruta del archivo escrito

    Raises:
        OSError: Si hay problemas de acceso al archivo
        ValueError: Si la configuración es inválida
    """
    config.validate()
    config_file = Path(config_path)
    ensure_directory_exists(config_file.parent)

    try:
        with open(config_file, 'w', encoding='utf-8') as f:
            toml.dump(config.to_dict(), f)
    except (OSError, IOError) as e:
        raise OSError(f"Error al guardar archivo de configuración: {e}") from e
    return config_file


def get_runtime_config(config_path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Obtiene la configuración de tiempo de ejecución.

    Args:
        config_path: Archivo TOML (opcional; sin él se usan los valores por defecto)

    Returns:
        RunConfig: Configuración con las sobrescrituras de entorno aplicadas
    """
    config = load_config_from_file(config_path) if config_path else get_default_config()
    _apply_environment_overrides(config)
    return config


def _apply_environment_overrides(config: RunConfig) -> None:
    """
    Aplica sobrescrituras desde variables de entorno.

    Solo el directorio de resultados puede sobrescribirse.

    Args:
        config: Configuración a modificar
    """
    if os.getenv(OUTPUT_ENV_VAR):
        config.system.output_dir = os.getenv(OUTPUT_ENV_VAR)


def merge_configs(base_config: RunConfig, override: Dict[str, Any]) -> RunConfig:
    """
    Combina una configuración con un diccionario de sobrescrituras.

    Args:
        base_config: Configuración base
        override: Diccionario (parcial) que sobrescribe

    Returns:
        RunConfig: Configuración combinada
    """
    merged_dict = _deep_merge_dicts(base_config.to_dict(), override)
    return RunConfig.from_dict(merged_dict)


def _deep_merge_dicts(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Combina diccionarios de forma recursiva.

    Args:
        base: Diccionario base
        override: Diccionario que sobrescribe

    Returns:
        Dict[str, Any]: Diccionario combinado
    """
    result = copy.deepcopy(base)

    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            # Las familias de datos se reemplazan completas si cambia su tipo
            if "kind" in value and value.get("kind") != result[key].get("kind"):
                result[key] = copy.deepcopy(value)
            else:
                result[key] = _deep_merge_dicts(result[key], value)
        else:
            result[key] = copy.deepcopy(value)

    return result


# Instancia global de configuración (singleton)
_global_config: Optional[RunConfig] = None


def get_global_config() -> RunConfig:
    """
    Obtiene la instancia global de configuración.

    Returns:
        RunConfig: Configuración global
    """
    global _global_config

    if _global_config is None:
        _global_config = get_runtime_config()

    return _global_config


def set_global_config(config: RunConfig) -> RunConfig:
    """
    Reemplaza la configuración global (la usa el CLI tras cargar el archivo).

    Args:
        config: Nueva configuración

    Returns:
        RunConfig: Configuración global
    """
    global _global_config
    _global_config = config
    return _global_config
