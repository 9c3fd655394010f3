"""
Geometría del dominio de cálculo.

Representa dominios bidimensionales uniformemente convexos (disco o
borde muestreado), construye la malla cartesiana recortada con los
datos de corte de cada rayo del esténcil, la cuadratura de borde en
nodos de igual longitud de arco y la cuadratura de área.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from loguru import logger
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.spatial.distance import pdist

from geometry.interpolation import (
    LocalQuadraticInterpolator,
    QuadraticOperators,
    trigonometric_interpolation_matrix,
)
from utils.config_utils import DomainConfig, GridConfig

# Direcciones de línea del esténcil (una por par ±)
BASE_DIRECTIONS = ((1, 0), (0, 1), (1, 1), (1, -1))
WIDE_DIRECTIONS = ((2, 1), (1, 2), (2, -1), (1, -2))
WIDE_STENCIL_THRESHOLD = 32

DENSE_BOUNDARY_SAMPLES = 2048
CELL_SUBSAMPLES = 8
DEFAULT_N_RADIAL = 48


def _as_points(points: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=float))


def _unit(vector: Sequence[float]) -> np.ndarray:
    e = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(e)
    if norm == 0:
        raise ValueError("La dirección no puede ser nula")
    return e / norm


class Domain(ABC):
    """
    Dominio convexo acotado del plano con borde parametrizado por longitud de arco.

    Las consultas están vectorizadas; el parámetro de borde ``s`` se toma
    módulo el perímetro y recorre el borde en sentido antihorario.
    """

    kind: str = ""

    @property
    @abstractmethod
    def perimeter(self) -> float:
        """Longitud del borde."""

    @property
    @abstractmethod
    def area(self) -> float:
        """Área del dominio."""

    @property
    @abstractmethod
    def centroid(self) -> np.ndarray:
        """Centro de masa del dominio."""

    @property
    @abstractmethod
    def diameter(self) -> float:
        """Diámetro del dominio."""

    @property
    @abstractmethod
    def rho_geom(self) -> Tuple[float, float]:
        """Cotas (inferior, superior) de la curvatura del borde."""

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """True para puntos estrictamente interiores."""

    @abstractmethod
    def distance(self, points: np.ndarray) -> np.ndarray:
        """Distancia al borde (positiva dentro, negativa fuera)."""

    @abstractmethod
    def boundary_point(self, s: np.ndarray) -> np.ndarray:
        """Punto del borde de parámetro s."""

    @abstractmethod
    def boundary_tangent(self, s: np.ndarray) -> np.ndarray:
        """Tangente unitaria (sentido antihorario)."""

    @abstractmethod
    def boundary_curvature(self, s: np.ndarray) -> np.ndarray:
        """Curvatura del borde."""

    @abstractmethod
    def ray_cut(self, origins: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Corte de los rayos origin + t·vector con el borde.

        Returns:
            Tuple[np.ndarray, np.ndarray]: Fracciones t > 0 y parámetros s del corte
        """

    @abstractmethod
    def support(self, direction: Sequence[float]) -> float:
        """Función soporte: máximo de e·x sobre el dominio (e unitario)."""

    @abstractmethod
    def chord_endpoints(self, direction: Sequence[float], offsets: np.ndarray
                        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Extremos de las cuerdas {e·x = b}.

        X2 − X1 es paralelo a τ = (−e₂, e₁) y el arco antihorario de s1 a s2
        es el lado {e·x > b}. Los desplazamientos que no cortan el dominio
        devuelven NaN.

        Returns:
            Tuple: (X1, X2, s1, s2)
        """

    @property
    def star_center(self) -> np.ndarray:
        """Punto interior respecto al cual el dominio es estrellado."""
        return self.centroid

    def boundary_normal(self, s: np.ndarray) -> np.ndarray:
        """Normal unitaria exterior."""
        tangent = self.boundary_tangent(s)
        return np.column_stack([tangent[:, 1], -tangent[:, 0]])

    def angle_of(self, s: np.ndarray) -> np.ndarray:
        """Parámetro angular 2πs/P usado por la interpolación trigonométrica."""
        return 2.0 * np.pi * np.mod(np.asarray(s, dtype=float), self.perimeter) / self.perimeter

    def boundary_curve(self, n_samples: int) -> dict:
        """
        Tabla del borde en n_samples puntos de igual longitud de arco.

        Returns:
            dict: s, puntos, normales, tangentes y curvaturas
        """
        s = np.arange(n_samples) * self.perimeter / n_samples
        return {
            "s": s,
            "points": self.boundary_point(s),
            "normals": self.boundary_normal(s),
            "tangents": self.boundary_tangent(s),
            "curvature": self.boundary_curvature(s),
        }

    def area_quadrature(self, n_radial: int = DEFAULT_N_RADIAL,
                        n_angular: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Cuadratura de área en coordenadas estrelladas respecto al centro.

        Usa Gauss-Legendre en la coordenada radial y la regla del trapecio
        periódica en el parámetro de borde; en el disco es la regla polar.

        Args:
            n_radial: Nodos radiales
            n_angular: Nodos angulares (por defecto 4·n_radial)

        Returns:
            Tuple[np.ndarray, np.ndarray]: Puntos (q, 2) y pesos (q,)
        """
        n_angular = n_angular or 4 * n_radial
        r, w_r = np.polynomial.legendre.leggauss(n_radial)
        r = 0.5 * (r + 1.0)
        w_r = 0.5 * w_r
        s = np.arange(n_angular) * self.perimeter / n_angular
        w_s = self.perimeter / n_angular

        center = self.star_center
        relative = self.boundary_point(s) - center
        tangent = self.boundary_tangent(s)
        jacobian = relative[:, 0] * tangent[:, 1] - relative[:, 1] * tangent[:, 0]

        points = center + r[:, None, None] * relative[None, :, :]
        weights = (r * w_r)[:, None] * jacobian[None, :] * w_s
        return points.reshape(-1, 2), weights.ravel()


class DiskDomain(Domain):
    """Disco de radio y centro dados."""

    kind = "disk"

    def __init__(self, radius: float, center: Sequence[float] = (0.0, 0.0)) -> None:
        if not radius > 0:
            raise ValueError(f"radius debe ser positivo, recibido: {radius}")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    @property
    def perimeter(self) -> float:
        return 2.0 * np.pi * self.radius

    @property
    def area(self) -> float:
        return np.pi * self.radius ** 2

    @property
    def centroid(self) -> np.ndarray:
        return self.center.copy()

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def rho_geom(self) -> Tuple[float, float]:
        return (1.0 / self.radius, 1.0 / self.radius)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.distance(points) > 0

    def distance(self, points: np.ndarray) -> np.ndarray:
        return self.radius - np.linalg.norm(_as_points(points) - self.center, axis=1)

    def boundary_point(self, s: np.ndarray) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(s, dtype=float)) / self.radius
        return self.center + self.radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def boundary_tangent(self, s: np.ndarray) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(s, dtype=float)) / self.radius
        return np.column_stack([-np.sin(theta), np.cos(theta)])

    def boundary_curvature(self, s: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_1d(s).shape, 1.0 / self.radius)

    def ray_cut(self, origins: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rel = _as_points(origins) - self.center
        vectors = _as_points(vectors)
        a = np.sum(vectors ** 2, axis=1)
        b = 2.0 * np.sum(rel * vectors, axis=1)
        c = np.sum(rel ** 2, axis=1) - self.radius ** 2
        t = (-b + np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)
        hit = rel + t[:, None] * vectors
        s = self.radius * np.mod(np.arctan2(hit[:, 1], hit[:, 0]), 2.0 * np.pi)
        return t, s

    def support(self, direction: Sequence[float]) -> float:
        e = _unit(direction)
        return float(e @ self.center + self.radius)

    def chord_endpoints(self, direction: Sequence[float], offsets: np.ndarray
                        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        e = _unit(direction)
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        phi = np.arctan2(e[1], e[0])
        beta = (offsets - e @ self.center) / self.radius
        valid = np.abs(beta) < 1.0
        alpha = np.where(valid, np.arccos(np.clip(beta, -1.0, 1.0)), np.nan)
        theta1 = phi - alpha
        theta2 = phi + alpha
        two_pi = 2.0 * np.pi
        s1 = self.radius * np.mod(theta1, two_pi)
        s2 = self.radius * np.mod(theta2, two_pi)
        X1 = self.center + self.radius * np.column_stack([np.cos(theta1), np.sin(theta1)])
        X2 = self.center + self.radius * np.column_stack([np.cos(theta2), np.sin(theta2)])
        return X1, X2, s1, s2


class SampledDomain(Domain):
    """
    Dominio uniformemente convexo descrito por muestras de su borde.

    Las muestras se interpolan con un spline cúbico periódico que se
    reparametriza por longitud de arco; las intersecciones con rayos y
    cuerdas usan el polígono denso inscrito.
    """

    kind = "sampled"

    def __init__(self, boundary_samples: np.ndarray,
                 n_dense: int = DENSE_BOUNDARY_SAMPLES) -> None:
        samples = _as_points(boundary_samples)
        if np.allclose(samples[0], samples[-1]):
            samples = samples[:-1]
        if len(samples) < 8:
            raise ValueError(f"Se requieren al menos 8 muestras de borde, recibido: {len(samples)}")

        signed_area = 0.5 * np.sum(samples[:, 0] * np.roll(samples[:, 1], -1)
                                   - np.roll(samples[:, 0], -1) * samples[:, 1])
        if signed_area < 0:
            samples = samples[::-1]
        self.samples = samples

        closed = np.vstack([samples, samples[:1]])
        chord = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(chord <= 0):
            raise ValueError("Las muestras de borde contienen puntos repetidos")
        tau = np.concatenate([[0.0], np.cumsum(chord)])
        self._spline = CubicSpline(tau, closed, bc_type="periodic")

        fine = np.linspace(0.0, tau[-1], max(16 * len(samples), 8192) + 1)
        speed = np.linalg.norm(self._spline(fine, 1), axis=1)
        self._arc = cumulative_trapezoid(speed, fine, initial=0.0)
        self._tau_fine = fine
        self._perimeter = float(self._arc[-1])

        s_dense = np.arange(n_dense) * self._perimeter / n_dense
        self._dense = self.boundary_point(s_dense)
        self._dense_s = np.append(s_dense, self._perimeter)

        curvature = self.boundary_curvature(s_dense)
        lo, hi = float(curvature.min()), float(curvature.max())
        if lo <= 0:
            raise ValueError(f"El borde no es uniformemente convexo: curvatura mínima {lo:.3e}")
        self._rho_geom = (lo, hi)

        polygon = self._dense
        x, y = polygon[:, 0], polygon[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        poly_area = 0.5 * cross.sum()
        self._star = np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * poly_area)

        points, weights = self.area_quadrature(DEFAULT_N_RADIAL)
        self._area = float(weights.sum())
        self._centroid = (weights @ points) / self._area
        self._diameter = float(pdist(polygon[:: max(1, n_dense // 1024)]).max())
        logger.debug(
            f"Dominio muestreado: perímetro={self._perimeter:.6f}, área={self._area:.6f}, "
            f"curvatura en [{lo:.4f}, {hi:.4f}]"
        )

    def _tau(self, s: np.ndarray) -> np.ndarray:
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self._perimeter)
        return np.interp(s, self._arc, self._tau_fine)

    @property
    def perimeter(self) -> float:
        return self._perimeter

    @property
    def area(self) -> float:
        return self._area

    @property
    def centroid(self) -> np.ndarray:
        return self._centroid.copy()

    @property
    def star_center(self) -> np.ndarray:
        return self._star

    @property
    def diameter(self) -> float:
        return self._diameter

    @property
    def rho_geom(self) -> Tuple[float, float]:
        return self._rho_geom

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.distance(points) > 0

    def distance(self, points: np.ndarray) -> np.ndarray:
        points = _as_points(points)
        start = self._dense
        edge = np.roll(self._dense, -1, axis=0) - start
        edge_len2 = np.sum(edge ** 2, axis=1)
        outward = np.column_stack([edge[:, 1], -edge[:, 0]])
        result = np.empty(len(points))
        for lo in range(0, len(points), 256):
            chunk = points[lo:lo + 256]
            rel = chunk[:, None, :] - start[None, :, :]
            lam = np.clip(np.sum(rel * edge[None], axis=2) / edge_len2[None], 0.0, 1.0)
            nearest = rel - lam[..., None] * edge[None]
            dist = np.sqrt(np.sum(nearest ** 2, axis=2)).min(axis=1)
            inside = np.all(np.sum(rel * outward[None], axis=2) <= 0.0, axis=1)
            result[lo:lo + 256] = np.where(inside, dist, -dist)
        return result

    def boundary_point(self, s: np.ndarray) -> np.ndarray:
        return self._spline(self._tau(s))

    def boundary_tangent(self, s: np.ndarray) -> np.ndarray:
        d1 = self._spline(self._tau(s), 1)
        return d1 / np.linalg.norm(d1, axis=1)[:, None]

    def boundary_curvature(self, s: np.ndarray) -> np.ndarray:
        tau = self._tau(s)
        d1 = self._spline(tau, 1)
        d2 = self._spline(tau, 2)
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        return cross / np.linalg.norm(d1, axis=1) ** 3

    def ray_cut(self, origins: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        origins = _as_points(origins)
        vectors = _as_points(vectors)
        start = self._dense
        edge = np.roll(self._dense, -1, axis=0) - start
        edge_s = np.diff(self._dense_s)
        t_out = np.full(len(origins), np.nan)
        s_out = np.full(len(origins), np.nan)
        for lo in range(0, len(origins), 256):
            o = origins[lo:lo + 256, None, :]
            v = vectors[lo:lo + 256, None, :]
            rel = start[None] - o
            denom = v[..., 0] * edge[None, :, 1] - v[..., 1] * edge[None, :, 0]
            safe = np.where(np.abs(denom) < 1e-300, np.nan, denom)
            t = (rel[..., 0] * edge[None, :, 1] - rel[..., 1] * edge[None, :, 0]) / safe
            lam = (rel[..., 0] * v[..., 1] - rel[..., 1] * v[..., 0]) / safe
            ok = (t > 1e-14) & (lam >= -1e-12) & (lam <= 1.0 + 1e-12)
            t = np.where(ok, t, np.inf)
            k = np.argmin(t, axis=1)
            rows = np.arange(len(k))
            t_out[lo:lo + 256] = t[rows, k]
            s_out[lo:lo + 256] = self._dense_s[k] + np.clip(lam[rows, k], 0.0, 1.0) * edge_s[k]
        return t_out, np.mod(s_out, self._perimeter)

    def support(self, direction: Sequence[float]) -> float:
        e = _unit(direction)
        return float((self._dense @ e).max())

    def chord_endpoints(self, direction: Sequence[float], offsets: np.ndarray
                        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        e = _unit(direction)
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        heights = self._dense @ e
        g = heights[None, :] - offsets[:, None]
        g_next = np.roll(g, -1, axis=1)
        rising = (g < 0) & (g_next >= 0)
        falling = (g >= 0) & (g_next < 0)
        valid = rising.any(axis=1) & falling.any(axis=1)

        def _crossing(mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            k = np.argmax(mask, axis=1)
            rows = np.arange(len(k))
            g0 = g[rows, k]
            g1 = g_next[rows, k]
            lam = np.where(valid, g0 / np.where(g0 == g1, 1.0, g0 - g1), np.nan)
            k_next = (k + 1) % len(heights)
            point = self._dense[k] + lam[:, None] * (self._dense[k_next] - self._dense[k])
            s = self._dense_s[k] + lam * (self._dense_s[k + 1] - self._dense_s[k])
            return point, np.mod(s, self._perimeter)

        X1, s1 = _crossing(rising)
        X2, s2 = _crossing(falling)
        X1[~valid] = np.nan
        X2[~valid] = np.nan
        return X1, X2, s1, s2


def make_disk(radius: float, center: Sequence[float] = (0.0, 0.0)) -> DiskDomain:
    """
    Crea un disco.

    Args:
        radius: Radio (positivo)
        center: Centro

    Returns:
        DiskDomain: Dominio con curvatura constante 1/radius

    Raises:
        ValueError: Si el radio no es positivo
    """
    return DiskDomain(radius, center)


def make_sampled_domain(boundary_samples: np.ndarray) -> SampledDomain:
    """Crea un dominio a partir de muestras de su borde."""
    return SampledDomain(boundary_samples)


@dataclass(frozen=True, eq=False)
class BoundaryQuadrature:
    """
    Cuadratura de borde en nodos de igual longitud de arco.

    Attributes:
        s: Parámetros de arco de los nodos
        points: Nodos, forma (m, 2)
        normals: Normales exteriores unitarias
        tangents: Tangentes unitarias
        curvature: Curvatura en los nodos
        weights: Pesos de longitud de arco
        perimeter: Perímetro del borde
    """
    s: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    perimeter: float

    @property
    def m(self) -> int:
        """Número de nodos."""
        return len(self.s)

    @property
    def theta(self) -> np.ndarray:
        """Parámetro angular de los nodos."""
        return 2.0 * np.pi * np.arange(self.m) / self.m

    def integrate(self, values: np.ndarray) -> float:
        """Integral de borde de valores nodales."""
        return float(self.weights @ np.asarray(values, dtype=float))


def boundary_quadrature(domain: Domain, m: int) -> BoundaryQuadrature:
    """
    Construye la cuadratura de borde de m nodos.

    Args:
        domain: Dominio
        m: Número de nodos (par, al menos 4)

    Returns:
        BoundaryQuadrature: Nodos, pesos, normales y tangentes

    Raises:
        ValueError: Si m es impar o menor que 4
    """
    if m < 4 or m % 2 != 0:
        raise ValueError(f"m debe ser par y mayor o igual a 4, recibido: {m}")
    table = domain.boundary_curve(m)
    return BoundaryQuadrature(
        s=table["s"],
        points=table["points"],
        normals=table["normals"],
        tangents=table["tangents"],
        curvature=table["curvature"],
        weights=np.full(m, domain.perimeter / m),
        perimeter=domain.perimeter,
    )


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Malla cartesiana recortada al dominio con esténcil ancho.

    Para cada dirección de línea ℓ y sentido k (0 = +, 1 = −) se guarda el
    índice del vecino interior o −1 si el rayo corta el borde, la fracción
    del paso hasta el vecino o el corte (en (0, 1]) y el parámetro de
    borde del corte.

    Attributes:
        spacing: Paso de malla h
        n: Número de celdas a lo largo del diámetro
        points: Nodos interiores, forma (N, 2)
        ij: Índices enteros de los nodos
        directions: Direcciones de línea, forma (L, 2)
        neighbors: Vecinos, forma (L, 2, N)
        fractions: Fracciones de paso, forma (L, 2, N)
        cut_s: Parámetros de corte (NaN para vecinos interiores)
        weights: Pesos de área de los nodos
    """
    spacing: float
    n: int
    points: np.ndarray
    ij: np.ndarray
    directions: np.ndarray
    neighbors: np.ndarray
    fractions: np.ndarray
    cut_s: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        """Número de nodos interiores."""
        return len(self.points)

    @property
    def n_lines(self) -> int:
        """Número de direcciones de línea."""
        return len(self.directions)

    @property
    def min_fraction(self) -> float:
        """Fracción de corte mínima."""
        return float(self.fractions.min())

    def line_index(self, direction: Sequence[int]) -> int:
        """
        Índice de la línea de dirección dada (se admite el sentido opuesto).

        Raises:
            KeyError: Si la dirección no pertenece al esténcil
        """
        p, q = int(direction[0]), int(direction[1])
        for k, (dp, dq) in enumerate(self.directions):
            if (dp, dq) == (p, q) or (dp, dq) == (-p, -q):
                return k
        raise KeyError(f"Dirección {direction} fuera del esténcil")

    def boundary_adjacent(self) -> np.ndarray:
        """Máscara de nodos con algún corte de borde."""
        return np.any(self.neighbors < 0, axis=(0, 1))


def _node_weights(domain: Domain, points: np.ndarray, h: float) -> np.ndarray:
    weights = np.full(len(points), h * h)
    near = domain.distance(points) < h / np.sqrt(2.0)
    if np.any(near):
        offsets = (np.arange(CELL_SUBSAMPLES) + 0.5) / CELL_SUBSAMPLES - 0.5
        ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
        sub = np.column_stack([ox.ravel(), oy.ravel()]) * h
        near_points = points[near]
        samples = (near_points[:, None, :] + sub[None, :, :]).reshape(-1, 2)
        inside = domain.contains(samples).reshape(len(near_points), -1)
        weights[near] = h * h * inside.mean(axis=1)
    return weights * domain.area / weights.sum()


def build_grid(domain: Domain, n: int) -> Grid:
    """
    Construye la malla de paso diámetro/n recortada al dominio.

    Usa 4 direcciones de línea (8 direcciones con signo) para n ≤ 32 y 8
    líneas (16 direcciones) por encima.

    Args:
        domain: Dominio
        n: Celdas a lo largo del diámetro (n ≥ 8)

    Returns:
        Grid: Malla con datos de corte

    Raises:
        ValueError: Si n < 8 o la malla queda sin nodos interiores
    """
    if n < 8:
        raise ValueError(f"n debe ser mayor o igual a 8, recibido: {n}")

    h = domain.diameter / n
    center = domain.centroid
    extent = int(np.ceil(domain.diameter / h)) + 3
    ii, jj = np.meshgrid(np.arange(-extent, extent + 1), np.arange(-extent, extent + 1), indexing="ij")
    lattice_ij = np.column_stack([ii.ravel(), jj.ravel()])
    lattice = center + h * lattice_ij
    inside = domain.distance(lattice) > 1e-12 * h
    if not np.any(inside):
        raise ValueError(f"La malla con n={n} no tiene nodos interiores")

    ij = lattice_ij[inside]
    points = lattice[inside]
    n_nodes = len(points)

    size = 2 * extent + 1
    index_map = -np.ones((size, size), dtype=int)
    index_map[ij[:, 0] + extent, ij[:, 1] + extent] = np.arange(n_nodes)

    directions = np.array(BASE_DIRECTIONS + (WIDE_DIRECTIONS if n > WIDE_STENCIL_THRESHOLD else ()))
    n_lines = len(directions)
    neighbors = -np.ones((n_lines, 2, n_nodes), dtype=int)
    fractions = np.ones((n_lines, 2, n_nodes))
    cut_s = np.full((n_lines, 2, n_nodes), np.nan)

    for line, (p, q) in enumerate(directions):
        for side, sign in enumerate((1, -1)):
            target = ij + sign * np.array([p, q])
            in_range = np.all((target >= -extent) & (target <= extent), axis=1)
            nb = -np.ones(n_nodes, dtype=int)
            nb[in_range] = index_map[target[in_range, 0] + extent, target[in_range, 1] + extent]
            neighbors[line, side] = nb
            cut = nb < 0
            if np.any(cut):
                vector = sign * h * np.array([p, q], dtype=float)
                t, s = domain.ray_cut(points[cut], np.tile(vector, (int(cut.sum()), 1)))
                fractions[line, side, cut] = np.clip(t, np.finfo(float).tiny, 1.0)
                cut_s[line, side, cut] = s

    weights = _node_weights(domain, points, h)
    grid = Grid(spacing=h, n=n, points=points, ij=ij, directions=directions,
                neighbors=neighbors, fractions=fractions, cut_s=cut_s, weights=weights)
    logger.debug(
        f"Malla n={n}: {n_nodes} nodos, h={h:.5f}, {n_lines} líneas, "
        f"fracción mínima={grid.min_fraction:.3e}"
    )
    return grid


@dataclass(frozen=True)
class DirectionalOperator:
    """
    Segunda diferencia direccional D = M·u + C·g a lo largo de una línea.

    Attributes:
        direction: Dirección entera de la línea
        unit: Dirección unitaria
        interior: Matriz (N, N) sobre los valores interiores
        boundary: Matriz (N, m) sobre la traza
    """
    direction: Tuple[int, int]
    unit: np.ndarray
    interior: sp.csr_matrix
    boundary: sp.csr_matrix

    def apply(self, values: np.ndarray, trace: np.ndarray) -> np.ndarray:
        """Evalúa la segunda diferencia."""
        return self.interior @ values + self.boundary @ trace


class Discretization:
    """
    Dominio, malla y cuadraturas de una ejecución, con operadores en caché.

    Las instancias son inmutables en la práctica y pueden compartirse
    entre resoluciones concurrentes.
    """

    def __init__(self, domain: Domain, grid: Grid, quad: BoundaryQuadrature,
                 n_radial: int = DEFAULT_N_RADIAL) -> None:
        self.domain = domain
        self.grid = grid
        self.quad = quad
        self.n_radial = n_radial

    @classmethod
    def build(cls, domain: Domain, n: int, m: int, n_radial: int = DEFAULT_N_RADIAL) -> 'Discretization':
        """Construye malla y cuadratura de borde para el dominio."""
        return cls(domain, build_grid(domain, n), boundary_quadrature(domain, m), n_radial)

    @property
    def h(self) -> float:
        """Paso de malla."""
        return self.grid.spacing

    @property
    def n_nodes(self) -> int:
        """Número de nodos interiores."""
        return self.grid.n_nodes

    @property
    def m(self) -> int:
        """Número de nodos de borde."""
        return self.quad.m

    def trace_matrix(self, s: np.ndarray) -> np.ndarray:
        """Matriz de interpolación trigonométrica de la traza en los parámetros s."""
        return trigonometric_interpolation_matrix(self.domain.angle_of(s), self.m)

    def trace_at(self, s: np.ndarray, trace: np.ndarray) -> np.ndarray:
        """Valores de la traza interpolada en los parámetros s."""
        return self.trace_matrix(s) @ np.asarray(trace, dtype=float)

    @cached_property
    def interpolator(self) -> LocalQuadraticInterpolator:
        """Interpolador cuadrático local sobre nodos interiores y de borde."""
        return LocalQuadraticInterpolator(self.grid.points, self.quad.points, self.h)

    def local_operators(self, points: np.ndarray) -> QuadraticOperators:
        """Operadores del interpolador local en los puntos dados."""
        return self.interpolator.operators(points)

    @cached_property
    def area_rule(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cuadratura de área (puntos, pesos)."""
        return self.domain.area_quadrature(self.n_radial)

    @cached_property
    def area_value_operator(self) -> sp.csr_matrix:
        """Operador que interpola (valores, traza) en los puntos de la cuadratura de área."""
        return self.interpolator.operators(self.area_rule[0]).value

    @cached_property
    def second_differences(self) -> List[DirectionalOperator]:
        """Segundas diferencias direccionales de tipo Shortley-Weller por línea."""
        grid = self.grid
        n_nodes = grid.n_nodes
        node_ids = np.arange(n_nodes)
        operators = []
        for line, (p, q) in enumerate(grid.directions):
            length = grid.spacing * np.hypot(p, q)
            a = grid.fractions[line, 0] * length
            b = grid.fractions[line, 1] * length
            coef = (2.0 / (a * (a + b)), 2.0 / (b * (a + b)))

            rows = [node_ids]
            cols = [node_ids]
            data = [-2.0 / (a * b)]
            boundary = sp.csr_matrix((n_nodes, self.m))
            for side in (0, 1):
                nb = grid.neighbors[line, side]
                interior = nb >= 0
                rows.append(node_ids[interior])
                cols.append(nb[interior])
                data.append(coef[side][interior])
                cut = ~interior
                if np.any(cut):
                    rows_cut = node_ids[cut]
                    block = self.trace_matrix(grid.cut_s[line, side, cut]) * coef[side][cut][:, None]
                    boundary = boundary + sp.csr_matrix(
                        (block.ravel(), (np.repeat(rows_cut, self.m), np.tile(np.arange(self.m), len(rows_cut)))),
                        shape=(n_nodes, self.m),
                    )
            interior_matrix = sp.csr_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n_nodes, n_nodes),
            )
            operators.append(DirectionalOperator(
                direction=(int(p), int(q)),
                unit=np.array([p, q], dtype=float) / np.hypot(p, q),
                interior=interior_matrix,
                boundary=boundary.tocsr(),
            ))
        return operators

    def line(self, direction: Sequence[int]) -> DirectionalOperator:
        """Operador de segunda diferencia de la línea con la dirección dada."""
        return self.second_differences[self.grid.line_index(direction)]


def make_domain(config: DomainConfig) -> Domain:
    """Crea el dominio descrito en la configuración."""
    if config.kind == "disk":
        return make_disk(config.radius, config.center)
    return make_sampled_domain(np.asarray(config.boundary_samples, dtype=float))


def build_discretization(domain_config: DomainConfig, grid_config: GridConfig) -> Discretization:
    """
    Construye dominio, malla y cuadraturas a partir de la configuración.

    Args:
        domain_config: Sección del dominio
        grid_config: Sección de la malla

    Returns:
        Discretization: Discretización lista para los resolvedores
    """
    domain = make_domain(domain_config)
    disc = Discretization.build(domain, grid_config.n, grid_config.m, grid_config.n_radial)
    logger.info(
        f"Discretización: dominio {domain.kind}, n={grid_config.n} ({disc.n_nodes} nodos), "
        f"m={grid_config.m}"
    )
    return disc
