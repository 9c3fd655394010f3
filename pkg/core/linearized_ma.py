"""
Operador de Monge-Ampère linealizado U^{ij}∂_{ij}.

Ensambla el operador en forma no divergente a partir de los cofactores
del hessiano discreto de una u convexa, escribiendo los términos cruzados
con segundas diferencias en un marco rotado para que cada fila sea
monótona. Resuelve los problemas de Dirichlet para v y para funciones
U-armónicas y evalúa el flujo de borde U^{νν}v_ν.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from loguru import logger
from scipy.sparse.linalg import spsolve

from core.ma_dirichlet import (
    Field,
    GridFunction,
    HessianField,
    boundary_field,
    hessian_cofactor,
    nodal_field,
)
from geometry.domain_geometry import Discretization
from geometry.interpolation import periodic_derivative, periodic_smooth3
from utils.config_utils import SolverConfig
from utils.validation_utils import ConditioningError, PreconditionError

AXIS_LINES = ((1, 0), (0, 1))
DIAGONAL_LINES = ((1, 1), (1, -1))
FLUX_FLOOR = 1e-10
SHELL_COLUMNS = ["distance_lo", "distance_hi", "mean_distance", "nodes", "min_ratio", "max_ratio"]


@dataclass(eq=False)
class LinearizedOperator:
    """
    Operador U^{ij}D_{ij} sobre los nodos interiores.

    Actúa como interior @ valores + boundary @ traza.

    Attributes:
        disc: Discretización
        hessian: Campo de hessianos del que se construyó
        interior: Matriz dispersa (N, N)
        boundary: Matriz dispersa (N, m)
        repaired_rows: Filas no monótonas reparadas
        diagnostics: Autovalores extremos de U y fracción reparada
    """
    disc: Discretization
    hessian: HessianField
    interior: sp.csr_matrix
    boundary: sp.csr_matrix
    repaired_rows: int = 0
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def apply(self, phi: GridFunction) -> np.ndarray:
        """Aplica el operador a un campo con traza."""
        return self.interior @ phi.values + self.boundary @ phi.trace

    @property
    def n_nodes(self) -> int:
        return self.disc.n_nodes


def _frame_weights(U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pesos de las cuatro líneas (e1, e2, d+, d−) en los dos marcos.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Pesos (N, 4) del marco de ejes y del marco diagonal
    """
    u11, u22, u12 = U[:, 0, 0], U[:, 1, 1], U[:, 0, 1]
    n = len(u11)

    axes = np.zeros((n, 4))
    cross = np.abs(u12)
    axes[:, 0] = u11 - cross
    axes[:, 1] = u22 - cross
    axes[:, 2] = np.where(u12 >= 0, 2.0 * cross, 0.0)
    axes[:, 3] = np.where(u12 < 0, 2.0 * cross, 0.0)

    # coeficientes en la base diagonal
    upp = 0.5 * (u11 + 2.0 * u12 + u22)
    uqq = 0.5 * (u11 - 2.0 * u12 + u22)
    upq = 0.5 * (u11 - u22)
    diagonal = np.zeros((n, 4))
    cross = np.abs(upq)
    diagonal[:, 2] = upp - cross
    diagonal[:, 3] = uqq - cross
    diagonal[:, 0] = np.where(upq >= 0, 2.0 * cross, 0.0)
    diagonal[:, 1] = np.where(upq < 0, 2.0 * cross, 0.0)
    return axes, diagonal


def assemble(u: GridFunction, opts: Optional[SolverConfig] = None) -> LinearizedOperator:
    """
    Ensambla el operador linealizado de u.

    Cada fila usa el marco de ejes si es monótono; si no, el marco
    diagonal; si ninguno lo es, se recortan los pesos negativos y la fila
    cuenta como reparada.

    Args:
        u: Campo convexo con traza
        opts: Opciones (fracción reparable de filas)

    Returns:
        LinearizedOperator: Operador disperso con diagnósticos

    Raises:
        PreconditionError: Si u no tiene certificada la convexidad
        ConditioningError: Si las filas reparadas superan la fracción admitida
    """
    opts = opts or SolverConfig()
    if not u.convex:
        raise PreconditionError("El operador linealizado requiere una u con convexidad certificada")

    disc = u.disc
    hessian = hessian_cofactor(u)
    axes, diagonal = _frame_weights(hessian.cofactor)
    axes_ok = axes.min(axis=1) >= 0
    diagonal_ok = diagonal.min(axis=1) >= 0
    weights = np.where(axes_ok[:, None], axes, diagonal)
    broken = ~(axes_ok | diagonal_ok)
    if np.any(broken):
        best = np.where((axes.min(axis=1) >= diagonal.min(axis=1))[:, None], axes, diagonal)
        weights[broken] = np.maximum(best[broken], 0.0)

    repaired = int(broken.sum())
    fraction = repaired / disc.n_nodes
    eigenvalues = hessian.cofactor_eigenvalues()
    diagnostics = {
        "min_eigenvalue": float(eigenvalues[:, 0].min()),
        "max_eigenvalue": float(eigenvalues[:, 1].max()),
        "repaired_fraction": fraction,
        "diagonal_frame_rows": int((~axes_ok & diagonal_ok).sum()),
    }
    if fraction > opts.repairable_fraction:
        raise ConditioningError(
            f"{repaired} filas no monótonas ({fraction:.1%}); amplíe el esténcil (aumente n)",
            diagnostics=diagnostics,
        )
    if repaired:
        logger.warning(f"{repaired} filas no monótonas reparadas en el operador linealizado")

    interior = sp.csr_matrix((disc.n_nodes, disc.n_nodes))
    boundary = sp.csr_matrix((disc.n_nodes, disc.m))
    for column, direction in enumerate(AXIS_LINES + DIAGONAL_LINES):
        line = disc.line(direction)
        scale = sp.diags(weights[:, column])
        interior = interior + scale @ line.interior
        boundary = boundary + scale @ line.boundary

    logger.debug(
        f"Operador linealizado: autovalores de U en [{diagnostics['min_eigenvalue']:.4g}, "
        f"{diagnostics['max_eigenvalue']:.4g}]"
    )
    return LinearizedOperator(disc, hessian, interior.tocsr(), boundary.tocsr(), repaired, diagnostics)


def _solve(op: LinearizedOperator, rhs: np.ndarray, linear_tol: float) -> np.ndarray:
    matrix = op.interior.tocsc()
    solution = spsolve(matrix, rhs)
    if not np.all(np.isfinite(solution)):
        raise ConditioningError("Sistema linealizado singular", diagnostics=dict(op.diagnostics))
    backward = np.abs(matrix @ solution - rhs).max() / (
        abs(matrix).max() * np.abs(solution).max() + np.abs(rhs).max() + np.finfo(float).tiny
    )
    if backward > linear_tol:
        diagnostics = dict(op.diagnostics, backward_error=float(backward))
        raise ConditioningError(f"Residuo del sistema lineal {backward:.3e} > {linear_tol:.1e}",
                                diagnostics=diagnostics)
    return solution


def solve_v(op: LinearizedOperator, A: Field, opts: Optional[SolverConfig] = None) -> GridFunction:
    """
    Resuelve U^{ij}v_{ij} = −A en Ω con v = 0 en ∂Ω.

    Args:
        op: Operador linealizado
        A: Densidad interior no negativa
        opts: Opciones (tolerancia del sistema lineal)

    Returns:
        GridFunction: v con traza nula

    Raises:
        ConditioningError: Si el sistema es singular o mal condicionado
    """
    opts = opts or SolverConfig()
    A_nodes = nodal_field(op.disc, A, "A")
    values = _solve(op, -A_nodes, opts.linear_tol)
    return GridFunction(op.disc, values, np.zeros(op.disc.m), name="v")


def solve_homogeneous(op: LinearizedOperator, phi_boundary: Field,
                      opts: Optional[SolverConfig] = None) -> GridFunction:
    """
    Resuelve U^{ij}φ_{ij} = 0 en Ω con φ dado en ∂Ω.

    Las filas monótonas garantizan el principio del máximo discreto.
    """
    opts = opts or SolverConfig()
    trace = boundary_field(op.disc, phi_boundary, "phi")
    values = _solve(op, -(op.boundary @ trace), opts.linear_tol)
    return GridFunction(op.disc, values, trace, name="phi")


def normal_derivative(w: GridFunction) -> np.ndarray:
    """
    Derivada normal exterior en los nodos de borde por diferencia unilateral de 3 puntos.

    Los valores interiores X − hν y X − 2hν salen del interpolador local.
    """
    disc = w.disc
    h = disc.h
    points = disc.quad.points
    normals = disc.quad.normals
    inner = w.evaluate(np.vstack([points - h * normals, points - 2.0 * h * normals]))
    first, second = inner[:disc.m], inner[disc.m:]
    return (3.0 * w.trace - 4.0 * first + second) / (2.0 * h)


def tangential_hessian(u: GridFunction, smooth: bool = False) -> np.ndarray:
    """
    U^{νν} = u_ττ en el borde: g_ss + κ·u_ν.

    Args:
        u: Campo con traza
        smooth: Aplica el filtro tangencial de 3 nodos

    Returns:
        np.ndarray: u_ττ en los nodos de borde
    """
    quad = u.disc.quad
    u_tt = periodic_derivative(u.trace, quad.perimeter, order=2) + quad.curvature * normal_derivative(u)
    if smooth:
        u_tt = periodic_smooth3(u_tt)
    return u_tt


def boundary_flux(u: GridFunction, v: GridFunction, smooth: bool = False) -> np.ndarray:
    """
    Flujo de borde U^{νν}v_ν por nodo de la cuadratura.

    Los valores U^{νν} ≤ 0 (ruido de discretización) se recortan a 1e-10.

    Args:
        u: Solución de Monge-Ampère
        v: Solución con traza nula
        smooth: Filtro tangencial de U^{νν}

    Returns:
        np.ndarray: U^{νν}v_ν en los nodos de borde
    """
    if np.abs(v.trace).max() > 1e-12:
        raise PreconditionError("boundary_flux requiere v = 0 en el borde")
    u_tt = tangential_hessian(u, smooth)
    clamped = u_tt <= 0
    if np.any(clamped):
        logger.warning(f"U^νν ≤ 0 en {int(clamped.sum())} nodos de borde; recortado a {FLUX_FLOOR:g}")
        u_tt = np.where(clamped, FLUX_FLOOR, u_tt)
    return u_tt * normal_derivative(v)


@dataclass
class BarrierReport:
    """
    Cotas de barrera de v respecto a la distancia al borde.

    Attributes:
        c_lower: Mayor c con v ≥ c·dist en el collar
        C_upper: Menor C con v ≤ C·dist en el collar
        negative: Si v toma valores negativos
        degenerate: Si c_lower ≤ 0
        shells: Tabla por capa de distancia al borde (límites, distancia media, nodos, min y max de v/dist)
        shell_max: Máximo de v en la capa dist ≈ rho/2
        interior_min: Mínimo de v en {dist ≥ delta}
    """
    c_lower: float
    C_upper: float
    negative: bool
    degenerate: bool
    shells: pd.DataFrame
    shell_max: float
    interior_min: float


def check_barriers(v: GridFunction, rho: float, delta: float = 0.1, n_shells: int = 8) -> BarrierReport:
    """
    Ajusta las constantes de barrera de v en el collar {dist < rho}.

    Args:
        v: Solución de solve_v
        rho: Ancho del collar
        delta: Profundidad del núcleo interior para el mínimo de v
        n_shells: Capas de igual espesor en el collar

    Returns:
        BarrierReport: Informe (sin excepciones)
    """
    disc = v.disc
    dist = disc.domain.distance(disc.grid.points)
    collar = dist < rho
    ratio = v.values / dist

    c_lower = float(ratio[collar].min()) if np.any(collar) else float("nan")
    C_upper = float(ratio[collar].max()) if np.any(collar) else float("nan")

    edges = np.linspace(0.0, rho, n_shells + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (dist >= lo) & (dist < hi)
        if np.any(mask):
            rows.append({
                "distance_lo": lo,
                "distance_hi": hi,
                "mean_distance": float(dist[mask].mean()),
                "nodes": int(mask.sum()),
                "min_ratio": float(ratio[mask].min()),
                "max_ratio": float(ratio[mask].max()),
            })

    half = np.abs(dist - 0.5 * rho) <= disc.h
    core = dist >= delta
    return BarrierReport(
        c_lower=c_lower,
        C_upper=C_upper,
        negative=bool(v.values.min() < 0),
        degenerate=bool(not c_lower > 0),
        shells=pd.DataFrame(rows, columns=SHELL_COLUMNS),
        shell_max=float(v.values[half].max()) if np.any(half) else float("nan"),
        interior_min=float(v.values[core].min()) if np.any(core) else float("nan"),
    )
