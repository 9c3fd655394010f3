"""
Diagnósticos cuantitativos sobre soluciones calculadas.

Identidad de cuerdas, funcional de cuerdas normalizado por h³, separación
cuadrática en el borde, contención de secciones y el lema de altura
unidimensional. Todas las funciones son puras e informan sin modificar
los campos.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.integrate import simpson, trapezoid
from scipy.optimize import brentq

from core.linearized_ma import LinearizedOperator, solve_homogeneous
from core.ma_dirichlet import GridFunction
from core.problem_data import ProblemData, crease_integrals
from geometry.domain_geometry import Domain
from utils.validation_utils import PreconditionError

MIN_CHORD_SPACINGS = 4
SEPARATION_MIN_SPACINGS = 4
CONTAINMENT_TOL = 1e-12


@dataclass
class Chord:
    """
    Cuerda {ν·x = b} del dominio.

    Attributes:
        direction: Normal unitaria ν de la cuerda
        offset: Desplazamiento b
        X1: Extremo inicial (en el borde)
        X2: Extremo final (en el borde)
        s1: Parámetro de arco de X1
        s2: Parámetro de arco de X2
        half_length: Semilongitud h
        tangent: Tangente τ paralela a X2 − X1
    """
    direction: np.ndarray
    offset: float
    X1: np.ndarray
    X2: np.ndarray
    s1: float
    s2: float
    half_length: float
    tangent: np.ndarray

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.X1 + self.X2)


def make_chord(domain: Domain, direction: Sequence[float], offset: float) -> Chord:
    """
    Construye la cuerda de dirección normal ν y desplazamiento b.

    Raises:
        ValueError: Si la recta no corta el dominio
    """
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    X1, X2, s1, s2 = domain.chord_endpoints(e, np.array([offset]))
    if not np.all(np.isfinite(X1)):
        raise ValueError(f"La recta ν·x = {offset} no corta el dominio")
    return Chord(
        direction=e,
        offset=float(offset),
        X1=X1[0],
        X2=X2[0],
        s1=float(s1[0]),
        s2=float(s2[0]),
        half_length=0.5 * float(np.linalg.norm(X2[0] - X1[0])),
        tangent=(X2[0] - X1[0]) / np.linalg.norm(X2[0] - X1[0]),
    )


def _chord_samples(w: GridFunction, chord: Chord) -> Tuple[np.ndarray, np.ndarray, float]:
    h = chord.half_length
    spacing = 0.5 * w.disc.h
    intervals = int(np.ceil(2.0 * h / spacing))
    intervals += intervals % 2
    t = np.linspace(-h, h, intervals + 1)
    delta = t[1] - t[0]
    values = np.empty_like(t)
    values[1:-1] = w.evaluate(chord.midpoint + t[1:-1, None] * chord.tangent)
    values[[0, -1]] = w.boundary_values(np.array([chord.s1, chord.s2]))
    return t, values, delta


def _second_derivative(values: np.ndarray, delta: float) -> np.ndarray:
    out = np.empty_like(values)
    out[1:-1] = (values[:-2] - 2.0 * values[1:-1] + values[2:]) / delta ** 2
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / delta ** 2
    out[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / delta ** 2
    return out


def _require_resolved(w: GridFunction, chord: Chord) -> None:
    if 2.0 * chord.half_length < MIN_CHORD_SPACINGS * w.disc.h:
        raise PreconditionError(
            f"Cuerda de longitud {2 * chord.half_length:.4f} menor que {MIN_CHORD_SPACINGS} pasos de malla"
        )


def chord_identity(u: GridFunction, chord: Chord) -> Tuple[float, float]:
    """
    Ambos lados de ∫_S u_ττ (h² − t²) = 4h((u(X₁) + u(X₂))/2 − media de u en S).

    u se muestrea a paso h_malla/2 a lo largo de la cuerda y u_ττ sale de
    segundas diferencias unidimensionales; las integrales usan Simpson.

    Args:
        u: Campo con traza
        chord: Cuerda

    Returns:
        Tuple[float, float]: (lhs, rhs)

    Raises:
        PreconditionError: Si la cuerda mide menos de 4 pasos de malla
    """
    _require_resolved(u, chord)
    t, values, delta = _chord_samples(u, chord)
    h = chord.half_length
    u_tt = _second_derivative(values, delta)
    lhs = float(simpson(u_tt * (h * h - t * t), x=t))
    mean = float(simpson(values, x=t)) / (2.0 * h)
    rhs = 4.0 * h * (0.5 * (values[0] + values[-1]) - mean)
    return lhs, rhs


def chord_integral(u: GridFunction, v: GridFunction, chord: Chord) -> float:
    """∫_S u_ττ v dH¹ a lo largo de la cuerda."""
    _require_resolved(u, chord)
    t, u_values, delta = _chord_samples(u, chord)
    _, v_values, _ = _chord_samples(v, chord)
    return float(simpson(_second_derivative(u_values, delta) * v_values, x=t))


def tangent_chord(domain: Domain, s: float, half_length: float) -> Chord:
    """
    Cuerda paralela a la tangente en el punto de borde de parámetro s con semilongitud dada.

    Raises:
        ValueError: Si ninguna cuerda normal a ν(s) alcanza esa semilongitud
    """
    normal = domain.boundary_normal(np.array([s]))[0]
    top = domain.support(normal)
    base = float(normal @ domain.centroid)

    def excess(b: float) -> float:
        X1, X2, _, _ = domain.chord_endpoints(normal, np.array([b]))
        return 0.5 * float(np.linalg.norm(X2[0] - X1[0])) - half_length

    if excess(base) < 0:
        raise ValueError(f"Semilongitud {half_length} mayor que la cuerda central")
    offset = brentq(excess, base, top - 1e-12 * max(1.0, abs(top)))
    return make_chord(domain, normal, offset)


def chord_functional(u: GridFunction, v: GridFunction, z: float, h_values: Sequence[float],
                     bracket: Sequence[float] = (0.05, 20.0),
                     data: Optional[ProblemData] = None) -> pd.DataFrame:
    """
    Tabla de ∫_S u_ττ v / h³ para cuerdas tangenciales cerca del punto z.

    Con datos del problema se añade el lado ∮l⁺σ − ∫l⁺A de la igualdad en
    el minimizador.

    Args:
        u: Solución de Monge-Ampère
        v: Campo v
        z: Parámetro de arco del punto de borde
        h_values: Semilongitudes
        bracket: Intervalo aceptable (por defecto [0.05, 20])
        data: Datos opcionales para el lado derecho

    Returns:
        pd.DataFrame: (h, offset, integral, ratio, escaped, L_plus, L_plus_ratio)
    """
    rows = []
    for h in h_values:
        chord = tangent_chord(u.disc.domain, z, h)
        integral = chord_integral(u, v, chord)
        ratio = integral / h ** 3
        row = {
            "h": h,
            "offset": chord.offset,
            "integral": integral,
            "ratio": ratio,
            "escaped": bool(not bracket[0] <= ratio <= bracket[1]),
        }
        if data is not None:
            boundary, area = crease_integrals(data, chord.direction, np.array([chord.offset]))
            row["L_plus"] = float(boundary[0] - area[0])
            row["L_plus_ratio"] = row["L_plus"] / h ** 3
        rows.append(row)
    table = pd.DataFrame(rows)
    if table["escaped"].any():
        logger.warning(f"Funcional de cuerdas fuera de [{bracket[0]}, {bracket[1]}] en {int(table['escaped'].sum())} cuerdas")
    return table


def boundary_gradients(u: GridFunction) -> np.ndarray:
    """
    Gradiente límite en los nodos de borde por extrapolación cuadrática.

    Usa los gradientes interpolados en X − khν, k = 1, 2, 3.
    """
    disc = u.disc
    h = disc.h
    points = disc.quad.points
    normals = disc.quad.normals
    stacked = np.vstack([points - k * h * normals for k in (1, 2, 3)])
    grads = u.gradient(stacked).reshape(3, disc.m, 2)
    return 3.0 * grads[0] - 3.0 * grads[1] + grads[2]


def quadratic_separation(u: GridFunction) -> Tuple[float, float]:
    """
    Constantes de separación cuadrática de u en el borde respecto a sus planos tangentes.

    Se excluyen pares a distancia menor que 4 pasos de malla.

    Returns:
        Tuple[float, float]: (c_min, C_max)
    """
    disc = u.disc
    points = disc.quad.points
    grads = boundary_gradients(u)
    diff = points[None, :, :] - points[:, None, :]
    dist2 = np.sum(diff ** 2, axis=2)
    excess = u.trace[None, :] - u.trace[:, None] - np.einsum("ik,ijk->ij", grads, diff)
    mask = dist2 >= (SEPARATION_MIN_SPACINGS * disc.h) ** 2
    ratios = excess[mask] / dist2[mask]
    return float(ratios.min()), float(ratios.max())


@dataclass
class SectionReport:
    """Sección S_h(x) discreta."""
    extent: float
    contained: bool
    margin: float
    n_nodes: int


def section_check(u: GridFunction, x: Sequence[float], height: float) -> SectionReport:
    """
    Sección {y : u(y) < u(x) + ∇u(x)(y − x) + h} por umbral nodal.

    La sección está compactamente contenida si la traza queda por encima
    del plano elevado en todos los nodos de borde.

    Args:
        u: Campo convexo
        x: Centro de la sección (punto interior)
        height: Altura h

    Returns:
        SectionReport: Extensión máxima desde x y contención
    """
    x = np.asarray(x, dtype=float)
    value = float(u.evaluate(x[None, :])[0])
    gradient = u.gradient(x[None, :])[0]
    disc = u.disc

    plane_interior = value + (disc.grid.points - x) @ gradient + height
    inside = u.values < plane_interior
    extent = float(np.linalg.norm(disc.grid.points[inside] - x, axis=1).max()) if np.any(inside) else 0.0

    plane_boundary = value + (disc.quad.points - x) @ gradient + height
    margin = float((u.trace - plane_boundary).min())
    return SectionReport(extent, bool(margin > CONTAINMENT_TOL), margin, int(inside.sum()))


def interior_sections(u: GridFunction, height: float, center_depth: float = 0.2,
                      containment_depth: float = 0.05) -> pd.DataFrame:
    """
    Secciones de altura h centradas en nodos con dist ≥ center_depth.

    Comprueba que cada sección quede en {dist ≥ containment_depth}.
    """
    disc = u.disc
    points = disc.grid.points
    dist = disc.domain.distance(points)
    centers = np.flatnonzero(dist >= center_depth)
    values = u.evaluate(points[centers])
    gradients = u.gradient(points[centers])
    rows = []
    for node, value, gradient in zip(centers, values, gradients):
        x = points[node]
        members = u.values < value + (points - x) @ gradient + height
        margin = float((u.trace - value - (disc.quad.points - x) @ gradient - height).min())
        extent = float(np.linalg.norm(points[members] - x, axis=1).max()) if np.any(members) else 0.0
        depth = float(dist[members].min()) if np.any(members) else float(dist[node])
        rows.append({
            "node": int(node),
            "x": x[0],
            "y": x[1],
            "extent": extent,
            "min_depth": depth,
            "contained": bool(margin > CONTAINMENT_TOL and depth >= containment_depth),
        })
    return pd.DataFrame(rows, columns=["node", "x", "y", "extent", "min_depth", "contained"])


@dataclass
class HeightLemmaReport:
    """
    Resultado del lema de altura unidimensional.

    Attributes:
        applicable: Si se cumplen la condición de área y la de pequeñez interior
        passed: Si f(±h) ≤ C·h² con C = 12M
        C_fit: max(f(−h), f(h))/h²
        C_lemma: Constante del lema
        area_excess: Promedio de extremos menos media
    """
    applicable: bool
    passed: bool
    C_fit: float
    C_lemma: float
    area_excess: float


def height_lemma_check(t: np.ndarray, values: np.ndarray, M: float) -> HeightLemmaReport:
    """
    Verifica f(±h) ≤ C·h² para un perfil convexo no negativo en [−h, h].

    Condiciones: (f(−h) + f(h))/2 − media ≤ M·h² y algún |t| ≤ h/2 con
    f(t) ≤ M·h². El argumento de triángulos da C = 12M.

    Args:
        t: Abscisas crecientes, simétricas respecto a 0
        values: Valores del perfil
        M: Constante de las hipótesis

    Returns:
        HeightLemmaReport: Aplicabilidad, veredicto y C ajustada

    Raises:
        PreconditionError: Si el perfil no es convexo o toma valores negativos
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    scale = max(float(np.abs(values).max()), 1.0)
    slopes = np.diff(values) / np.diff(t)
    if np.any(np.diff(slopes) < -1e-9 * scale):
        raise PreconditionError("El perfil no es convexo")
    if np.any(values < -1e-12 * scale):
        raise PreconditionError("El perfil toma valores negativos")

    h = 0.5 * (t[-1] - t[0])
    mean = float(trapezoid(values, x=t)) / (2.0 * h)
    area_excess = 0.5 * (values[0] + values[-1]) - mean
    small = np.any((np.abs(t) <= 0.5 * h) & (values <= M * h * h))
    applicable = bool(area_excess <= M * h * h and small)
    C_fit = max(values[0], values[-1]) / (h * h)
    C_lemma = 12.0 * M
    return HeightLemmaReport(applicable, bool(applicable and C_fit <= C_lemma), float(C_fit), C_lemma,
                             float(area_excess))


def boundary_profile(u: GridFunction, s: float, half_width: float,
                     n_samples: int = 41) -> Tuple[np.ndarray, np.ndarray]:
    """
    Perfil de la traza de u menos su recta tangente en el punto de borde s.

    Parametriza el borde cerca de s por la proyección tangencial t y devuelve
    (t, u − plano tangente), convexo y nulo en t = 0.
    """
    disc = u.disc
    domain = disc.domain
    point = domain.boundary_point(np.array([s]))[0]
    tangent = domain.boundary_tangent(np.array([s]))[0]
    gradient = boundary_gradients(u)
    gradient_at = np.array([disc.trace_at(np.array([s]), gradient[:, k])[0] for k in (0, 1)])
    arc = np.linspace(s - half_width, s + half_width, n_samples)
    pts = domain.boundary_point(arc)
    t = (pts - point) @ tangent
    heights = u.boundary_values(arc) - u.boundary_values(np.array([s]))[0] - (pts - point) @ gradient_at
    return t, heights


def crease_identity_check(u: GridFunction, v: GridFunction, op: LinearizedOperator, data: ProblemData,
                          direction: Sequence[float], offset: float) -> Dict[str, float]:
    """
    Compara ∫φ dA con ∫l⁺ dA + ∫_S u_ττ v para φ U-armónica con φ = l⁺ en el borde.

    Returns:
        Dict[str, float]: lhs, rhs y diferencia relativa
    """
    disc = u.disc
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    phi = solve_homogeneous(op, np.maximum(disc.quad.points @ e - offset, 0.0))
    points, weights = disc.area_rule
    density = data.A_area * weights
    lhs = float(density @ phi.evaluate(points))
    lplus_area = float(density @ np.maximum(points @ e - offset, 0.0))
    chord = make_chord(disc.domain, e, offset)
    rhs = lplus_area + chord_integral(u, v, chord)
    return {"lhs": lhs, "rhs": rhs, "relative_gap": abs(lhs - rhs) / max(abs(rhs), 1e-300)}
