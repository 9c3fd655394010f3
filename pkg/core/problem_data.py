"""
Datos del problema (f, sigma, A) y verificación de estabilidad.

Construye los datos a partir de las familias paramétricas de la
configuración (o de CSV tabulados), comprueba las cotas, el equilibrio de
masa y de centro de masa, y estima la constante de estabilidad con el
criterio bidimensional de funciones pliegue l⁺.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger

from core.ma_dirichlet import GridFunction
from geometry.domain_geometry import Discretization
from geometry.interpolation import LocalQuadraticInterpolator
from utils.config_utils import DataConfig
from utils.validation_utils import DataValidationError, PreconditionError, validate_csv_file

CREASE_GAUSS = 96


class ConstantDensity:
    """Densidad constante."""

    def __init__(self, value: float) -> None:
        self.value = float(value)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.full(len(np.atleast_2d(points)), self.value)


class BumpDensity:
    """
    Suma de bultos radiales de masa dada sobre un fondo constante.

    Cada bulto vale masa·3/(πw²)·(1 − r²/w²)² para r < w, con integral igual
    a su masa.
    """

    def __init__(self, bumps: Sequence[Dict[str, Any]], background: float = 0.0) -> None:
        self.centers = np.array([b["center"] for b in bumps], dtype=float).reshape(-1, 2)
        self.widths = np.array([b["width"] for b in bumps], dtype=float)
        self.masses = np.array([b["mass"] for b in bumps], dtype=float)
        self.background = float(background)
        if np.any(self.widths <= 0):
            raise ValueError(f"width de los bultos debe ser positivo, recibido: {self.widths}")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        out = np.full(len(points), self.background)
        for center, width, mass in zip(self.centers, self.widths, self.masses):
            r2 = np.sum((points - center) ** 2, axis=1) / width ** 2
            out += mass * 3.0 / (np.pi * width ** 2) * np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
        return out


class TabulatedDensity:
    """Densidad dada en los nodos de la malla, interpolada con nodos interiores."""

    def __init__(self, disc: Discretization, nodal_values: np.ndarray) -> None:
        self.nodal_values = np.asarray(nodal_values, dtype=float)
        self._interpolator = LocalQuadraticInterpolator(disc.grid.points, None, disc.h, k_boundary=0)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self._interpolator.evaluate(np.atleast_2d(points), self.nodal_values)


class BalancedDensity:
    """Densidad reescalada y corregida por una función afín: s·A(x) + p·(x − x_c)."""

    def __init__(self, base: Callable[[np.ndarray], np.ndarray], scale: float,
                 slope: np.ndarray, center: np.ndarray) -> None:
        self.base = base
        self.scale = float(scale)
        self.slope = np.asarray(slope, dtype=float)
        self.center = np.asarray(center, dtype=float)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return self.scale * self.base(points) + (points - self.center) @ self.slope


class ScaledDensity:
    """Múltiplo positivo de otra densidad."""

    def __init__(self, base: Callable[[np.ndarray], np.ndarray], factor: float) -> None:
        self.base = base
        self.factor = float(factor)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.factor * self.base(points)


@dataclass(eq=False)
class ProblemData:
    """
    Datos (f, sigma, A) tabulados sobre una discretización.

    Attributes:
        disc: Discretización de referencia
        f: Determinante prescrito en los nodos interiores
        sigma: Densidad de borde en los nodos de cuadratura
        A: Evaluador de la densidad interior
        rho: Constante de cotas
        balance_tol: Tolerancia relativa del equilibrio
        correction: Corrección de equilibrio aplicada (escala y pendiente)
    """
    disc: Discretization
    f: np.ndarray
    sigma: np.ndarray
    A: Callable[[np.ndarray], np.ndarray]
    rho: float
    balance_tol: float = 1e-6
    correction: Optional[Dict[str, Any]] = None

    @property
    def A_nodes(self) -> np.ndarray:
        """A en los nodos interiores."""
        return self.A(self.disc.grid.points)

    @property
    def A_area(self) -> np.ndarray:
        """A en los puntos de la cuadratura de área."""
        return self.A(self.disc.area_rule[0])

    def sigma_at(self, s: np.ndarray) -> np.ndarray:
        """sigma interpolada en parámetros de arco arbitrarios."""
        return self.disc.trace_at(s, self.sigma)

    def with_f(self, f: np.ndarray) -> 'ProblemData':
        """Copia con otro determinante prescrito."""
        return replace(self, f=np.asarray(f, dtype=float))

    def scaled(self, factor: float) -> 'ProblemData':
        """Escala simultáneamente (sigma, A) por factor > 0."""
        if not factor > 0:
            raise ValueError(f"factor debe ser positivo, recibido: {factor}")
        return replace(self, sigma=factor * self.sigma, A=ScaledDensity(self.A, factor))

    def with_A(self, density: Callable[[np.ndarray], np.ndarray]) -> 'ProblemData':
        """Copia con otra densidad interior."""
        return replace(self, A=density, correction=None)


@dataclass
class StabilityReport:
    """
    Resultado del criterio de estabilidad con funciones pliegue.

    Attributes:
        balanced: Si las masas y centros de masa coinciden
        mass_gap: |∮σ − ∫A|
        center_gap: ∮xσ − ∫xA
        mu_hat: Mínimo muestreado de L(l⁺)/∮l⁺σ (None si no equilibrado)
        worst_crease: (dirección, desplazamiento) del mínimo
        values: Tabla por pliegue
        tolerance: Umbral de mu_hat
        n_directions: Direcciones muestreadas
        n_offsets: Desplazamientos por dirección
    """
    balanced: bool
    mass_gap: float
    center_gap: np.ndarray
    mu_hat: Optional[float]
    worst_crease: Optional[Tuple[np.ndarray, float]]
    values: pd.DataFrame
    tolerance: float
    n_directions: int
    n_offsets: int

    @property
    def stable(self) -> bool:
        """Estable si está equilibrado y mu_hat supera la tolerancia."""
        return bool(self.balanced and self.mu_hat is not None and self.mu_hat > self.tolerance)

    def to_summary(self) -> Dict[str, Any]:
        """Registro plano para el resumen de la ejecución."""
        summary = {
            "balanced": self.balanced,
            "stable": self.stable,
            "status": "stable" if self.stable else "unstable",
            "mass_gap": self.mass_gap,
            "center_gap_x": float(self.center_gap[0]),
            "center_gap_y": float(self.center_gap[1]),
            "mu_hat": self.mu_hat if self.mu_hat is not None else float("nan"),
            "n_directions": self.n_directions,
            "n_offsets": self.n_offsets,
        }
        if self.worst_crease is not None:
            direction, offset = self.worst_crease
            summary.update({
                "worst_direction_x": float(direction[0]),
                "worst_direction_y": float(direction[1]),
                "worst_offset": float(offset),
            })
        return summary


def _fourier_sigma(params: Dict[str, Any], theta: np.ndarray) -> np.ndarray:
    values = np.full(theta.shape, float(params.get("constant", 1.0)))
    for k, coef in enumerate(params.get("cos", []), start=1):
        values += float(coef) * np.cos(k * theta)
    for k, coef in enumerate(params.get("sin", []), start=1):
        values += float(coef) * np.sin(k * theta)
    return values


def affine_field(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    """
    Evaluador de la familia afín más Fourier para f.

    value + gradient·x + Σ cos·cos(π(kx x + ky y)) + sin·sin(π(kx x + ky y))
    """
    value = float(params.get("value", 1.0))
    gradient = np.asarray(params.get("gradient", [0.0, 0.0]), dtype=float)
    terms = list(params.get("terms", []))

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        out = value + points @ gradient
        for term in terms:
            phase = np.pi * (term.get("kx", 0.0) * points[:, 0] + term.get("ky", 0.0) * points[:, 1])
            out = out + term.get("cos", 0.0) * np.cos(phase) + term.get("sin", 0.0) * np.sin(phase)
        return out

    return evaluate


def _tabulated(params: Dict[str, Any], n_expected: int) -> np.ndarray:
    try:
        frame = validate_csv_file(params["path"], n_expected=n_expected)
    except ValueError as e:
        raise DataValidationError(str(e), field_name=params.get("path", "")) from e
    return frame["value"].to_numpy(dtype=float)


def _build_f(params: Dict[str, Any], disc: Discretization) -> np.ndarray:
    kind = params["kind"]
    if kind == "constant":
        return np.full(disc.n_nodes, float(params["value"]))
    if kind == "affine":
        return affine_field(params)(disc.grid.points)
    return _tabulated(params, disc.n_nodes)


def _build_sigma(params: Dict[str, Any], disc: Discretization) -> np.ndarray:
    kind = params["kind"]
    if kind == "constant":
        return np.full(disc.m, float(params["value"]))
    if kind == "fourier":
        return _fourier_sigma(params, disc.quad.theta)
    return _tabulated(params, disc.m)


def _build_A(params: Dict[str, Any], disc: Discretization) -> Callable[[np.ndarray], np.ndarray]:
    kind = params["kind"]
    if kind == "constant":
        return ConstantDensity(params["value"])
    if kind == "bumps":
        return BumpDensity(params.get("bumps", []), params.get("background", 0.0))
    return TabulatedDensity(disc, _tabulated(params, disc.n_nodes))


def _check_range(name: str, values: np.ndarray, lo: float, hi: float) -> None:
    bad = np.flatnonzero((values < lo) | (values > hi))
    if bad.size:
        node = int(bad[0])
        raise DataValidationError(
            f"{name} fuera de [{lo:.6g}, {hi:.6g}] en el nodo {node}: {values[node]:.6g}",
            field_name=name, node=node, value=float(values[node]),
        )


def _infer_rho(disc: Discretization, f: np.ndarray, sigma: np.ndarray, A_nodes: np.ndarray) -> float:
    rho = float(min(f.min(), 1.0 / f.max(), sigma.min(), 1.0 / sigma.max(), 1.0))
    collar = disc.domain.distance(disc.grid.points) < rho
    if np.any(collar) and A_nodes[collar].max() > 0:
        rho = min(rho, 1.0 / float(A_nodes[collar].max()))
    return rho


def validate_problem(data: ProblemData) -> ProblemData:
    """
    Comprueba las cotas de los datos.

    Raises:
        DataValidationError: Con el nodo infractor si alguna cota falla
    """
    disc = data.disc
    A_nodes = data.A_nodes
    for name, values in (("A", A_nodes), ("A (cuadratura)", data.A_area)):
        if np.any(values < 0):
            node = int(np.argmin(values))
            raise DataValidationError(
                f"{name} debe ser no negativa; mínimo {values[node]:.6g} en el nodo {node}",
                field_name="A", node=node, value=float(values[node]),
            )
    if np.any(data.sigma <= 0):
        node = int(np.argmin(data.sigma))
        raise DataValidationError(f"sigma debe ser positiva; nodo {node}: {data.sigma[node]:.6g}",
                                  field_name="sigma", node=node, value=float(data.sigma[node]))

    rho = data.rho
    _check_range("f", data.f, rho, 1.0 / rho)
    _check_range("sigma", data.sigma, rho, 1.0 / rho)
    collar = disc.domain.distance(disc.grid.points) < rho
    if np.any(collar):
        collar_values = np.where(collar, A_nodes, 0.0)
        _check_range("A (collar)", collar_values, 0.0, 1.0 / rho)
    return data


def load_problem(config: DataConfig, disc: Discretization) -> ProblemData:
    """
    Construye y valida los datos del problema sobre la discretización.

    Args:
        config: Sección de datos de la configuración
        disc: Discretización de la ejecución

    Returns:
        ProblemData: Datos tabulados con rho registrado (reequilibrados si se pide)

    Raises:
        DataValidationError: Si alguna cota falla o hay densidades negativas
    """
    f = _build_f(config.f, disc)
    sigma = _build_sigma(config.sigma, disc)
    A = _build_A(config.A, disc)
    if np.any(f <= 0):
        node = int(np.argmin(f))
        raise DataValidationError(f"f debe ser positiva; nodo {node}: {f[node]:.6g}",
                                  field_name="f", node=node, value=float(f[node]))

    rho = config.rho if config.rho is not None else _infer_rho(disc, f, sigma, A(disc.grid.points))
    data = ProblemData(disc=disc, f=f, sigma=sigma, A=A, rho=rho, balance_tol=config.balance_tol)
    if config.auto_balance:
        data = auto_balance(data)
    validate_problem(data)
    logger.info(f"Datos cargados: f∈[{f.min():.4g}, {f.max():.4g}], rho={rho:.4g}")
    return data


def area_moments(data: ProblemData) -> Tuple[float, np.ndarray]:
    """Masa y primer momento de A con la cuadratura de área."""
    points, weights = data.disc.area_rule
    density = data.A_area * weights
    return float(density.sum()), density @ points


def boundary_moments(data: ProblemData) -> Tuple[float, np.ndarray]:
    """Masa y primer momento de sigma con la cuadratura de borde."""
    quad = data.disc.quad
    density = data.sigma * quad.weights
    return float(density.sum()), density @ quad.points


def check_mass_balance(data: ProblemData) -> Tuple[float, np.ndarray]:
    """
    Diferencias de masa y de primer momento entre sigma y A.

    Returns:
        Tuple[float, np.ndarray]: (|∮σ − ∫A|, ∮xσ − ∫xA)
    """
    mass_sigma, moment_sigma = boundary_moments(data)
    mass_A, moment_A = area_moments(data)
    return abs(mass_sigma - mass_A), moment_sigma - moment_A


def is_balanced(data: ProblemData) -> bool:
    """Equilibrio relativo a la masa de sigma (y al diámetro para los momentos)."""
    mass_gap, center_gap = check_mass_balance(data)
    mass = boundary_moments(data)[0]
    scale = data.balance_tol * mass
    return bool(mass_gap <= scale and np.linalg.norm(center_gap) <= scale * data.disc.domain.diameter)


def auto_balance(data: ProblemData) -> ProblemData:
    """
    Reequilibra A con un reescalado y una corrección afín de media nula.

    A' = s·A + p·(x − x_c), con s igualando masas y p resolviendo el segundo
    momento del dominio para igualar los primeros momentos.

    Raises:
        DataValidationError: Si la corrección produce valores negativos de A
    """
    mass_sigma, moment_sigma = boundary_moments(data)
    mass_A, moment_A = area_moments(data)
    if not mass_A > 0:
        raise DataValidationError("No se puede reequilibrar A con masa nula", field_name="A")

    points, weights = data.disc.area_rule
    center = data.disc.domain.centroid
    rel = points - center
    second_moment = (rel * weights[:, None]).T @ rel
    scale = mass_sigma / mass_A
    slope = np.linalg.solve(second_moment, moment_sigma - scale * moment_A)
    balanced = BalancedDensity(data.A, scale, slope, center)

    minimum = min(float(balanced(data.disc.grid.points).min()), float(balanced(points).min()))
    if minimum < 0:
        raise DataValidationError(
            f"El reequilibrio produce A negativa (mínimo {minimum:.6g})", field_name="A", value=minimum
        )
    logger.warning(f"A reequilibrada: escala={scale:.8g}, pendiente=({slope[0]:.3e}, {slope[1]:.3e})")
    return replace(data, A=balanced, correction={"scale": scale, "slope": slope.tolist()})


def crease_integrals(data: ProblemData, direction: Sequence[float], offsets: np.ndarray,
                     n_gauss: int = CREASE_GAUSS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrales ∮l⁺σ y ∫l⁺A para l = e·x − b.

    La integral de borde se parte exactamente en los cortes del pliegue con
    el borde; la de área usa coordenadas (t, w) sobre el casquete {l > 0},
    con t = t_max − (t_max − b)s² para absorber la raíz en el extremo.

    Args:
        data: Datos del problema
        direction: Dirección e (se normaliza)
        offsets: Desplazamientos b
        n_gauss: Nodos de Gauss por dimensión

    Returns:
        Tuple[np.ndarray, np.ndarray]: Integrales de borde y de área por desplazamiento
    """
    domain = data.disc.domain
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    k = len(offsets)
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights

    _, _, s1, s2 = domain.chord_endpoints(e, offsets)
    arc = np.mod(s2 - s1, domain.perimeter)
    s_nodes = (s1[:, None] + arc[:, None] * nodes[None, :]).ravel()
    s_nodes = np.nan_to_num(s_nodes)
    boundary_points = domain.boundary_point(s_nodes)
    lplus = np.maximum(boundary_points @ e - np.repeat(offsets, n_gauss), 0.0)
    integrand = (lplus * data.sigma_at(s_nodes)).reshape(k, n_gauss)
    boundary = np.nan_to_num((integrand * weights).sum(axis=1) * arc)

    t_max = domain.support(e)
    depth = np.maximum(t_max - offsets, 0.0)
    heights = t_max - depth[:, None] * nodes[None, :] ** 2
    jacobian = 2.0 * depth[:, None] * nodes[None, :]
    Y1, Y2, _, _ = domain.chord_endpoints(e, heights.ravel())
    length = np.linalg.norm(Y2 - Y1, axis=1)
    samples = Y1[:, None, :] + nodes[None, :, None] * (Y2 - Y1)[:, None, :]
    density = data.A(np.nan_to_num(samples.reshape(-1, 2))).reshape(-1, n_gauss)
    inner = np.nan_to_num((density * weights).sum(axis=1) * length).reshape(k, n_gauss)
    area = ((heights - offsets[:, None]) * jacobian * weights * inner).sum(axis=1)
    return boundary, area


def _direction_rows(data: ProblemData, angle: float, n_offsets: int) -> List[Dict[str, float]]:
    domain = data.disc.domain
    e = np.array([np.cos(angle), np.sin(angle)])
    base = float(e @ domain.centroid)
    offsets = base + (domain.support(e) - base) * np.arange(n_offsets) / n_offsets
    boundary, area = crease_integrals(data, e, offsets)
    rows = []
    for b, bd, ar in zip(offsets, boundary, area):
        rows.append({
            "angle": angle,
            "direction_x": e[0],
            "direction_y": e[1],
            "offset": b,
            "boundary_integral": bd,
            "area_integral": ar,
            "L_plus": bd - ar,
            "ratio": (bd - ar) / bd if bd > 0 else np.nan,
        })
    return rows


def check_stability_2d(data: ProblemData, n_directions: int = 64, n_offsets: int = 64,
                       tolerance: float = 1e-6, n_jobs: int = 1) -> StabilityReport:
    """
    Estima la constante de estabilidad con pliegues l⁺ normalizados.

    Los pliegues tienen el centro de masa del dominio en su lado nulo, con
    desplazamientos b = e·x_c + (h_Ω(e) − e·x_c)·j/n_offsets.

    Args:
        data: Datos del problema
        n_directions: Direcciones e muestreadas uniformemente en ángulo
        n_offsets: Desplazamientos por dirección
        tolerance: Umbral de mu_hat para declarar estabilidad
        n_jobs: Trabajos paralelos (joblib)

    Returns:
        StabilityReport: Informe con mu_hat y el pliegue peor
    """
    mass_gap, center_gap = check_mass_balance(data)
    balanced = is_balanced(data)
    if not balanced:
        logger.warning(f"Datos no equilibrados: masa {mass_gap:.3e}, centro {np.linalg.norm(center_gap):.3e}")
        return StabilityReport(balanced, mass_gap, center_gap, None, None, pd.DataFrame(),
                               tolerance, n_directions, n_offsets)

    angles = 2.0 * np.pi * np.arange(n_directions) / n_directions
    chunks = Parallel(n_jobs=n_jobs)(delayed(_direction_rows)(data, a, n_offsets) for a in angles)
    values = pd.DataFrame([row for chunk in chunks for row in chunk])

    valid = values["boundary_integral"] > 0
    ratios = values.loc[valid, "ratio"]
    worst = int(ratios.idxmin())
    mu_hat = float(ratios.loc[worst])
    direction = values.loc[worst, ["direction_x", "direction_y"]].to_numpy(dtype=float)
    offset = float(values.loc[worst, "offset"])
    logger.info(f"Estabilidad: mu_hat={mu_hat:.6g} en e=({direction[0]:.3f}, {direction[1]:.3f}), b={offset:.4f}")
    return StabilityReport(balanced, mass_gap, center_gap, mu_hat, (direction, offset), values,
                           tolerance, n_directions, n_offsets)


def require_stable(data: ProblemData, n_directions: int = 64, n_offsets: int = 64,
                   tolerance: float = 1e-6, n_jobs: int = 1) -> StabilityReport:
    """
    Verifica la estabilidad como precondición.

    Raises:
        PreconditionError: Si los datos no están equilibrados o no son estables
    """
    report = check_stability_2d(data, n_directions, n_offsets, tolerance, n_jobs)
    if not report.balanced:
        raise PreconditionError(
            f"Los datos no están equilibrados (masa {report.mass_gap:.3e}); active auto_balance"
        )
    if not report.stable:
        raise PreconditionError(f"Los datos no son estables: mu_hat={report.mu_hat:.6g}")
    return report


def normalize(u: GridFunction) -> GridFunction:
    """
    Resta a u su plano tangente en el centro de masa del dominio.

    Valor y gradiente en x_c salen del ajuste cuadrático local (diferencias
    centradas en la malla), por lo que el resultado se anula en x_c.

    Raises:
        PreconditionError: Si u no es convexa o x_c queda fuera del dominio
    """
    if not u.convex:
        raise PreconditionError(f"normalize requiere una función convexa, '{u.name}' no lo es")
    center = u.disc.domain.centroid
    if not u.disc.domain.contains(center[None, :])[0]:
        raise PreconditionError(f"El centro de masa {center} está fuera del dominio")
    value = float(u.evaluate(center[None, :])[0])
    gradient = u.gradient(center[None, :])[0]
    return u.add_affine(-gradient, -value + gradient @ center)
