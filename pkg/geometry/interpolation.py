"""
Interpolación sobre el borde y en el interior del dominio.

Incluye la interpolación trigonométrica periódica de trazas dadas en
nodos de igual longitud de arco, derivadas espectrales a lo largo del
borde y un interpolador cuadrático local por mínimos cuadrados móviles
que produce matrices dispersas de valor, gradiente y hessiano.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

# Vecinos por defecto del interpolador local
DEFAULT_K_INTERIOR = 12
DEFAULT_K_BOUNDARY = 4
DEFAULT_RIDGE = 1e-10


def periodic_sinc(x: np.ndarray, m: int) -> np.ndarray:
    """
    Núcleo de interpolación trigonométrica para m par (nodos equiespaciados).

    Args:
        x: Diferencias angulares
        m: Número de nodos (par)

    Returns:
        np.ndarray: Valores del núcleo, igual a 1 en x = 0 (mod 2π)
    """
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    sin_half = np.sin(half)
    small = np.abs(sin_half) < 1e-14
    safe = np.where(small, 1.0, sin_half)
    values = np.sin(0.5 * m * x) * np.cos(half) / (m * safe)
    # el límite en x = 2πk es 1 para m par
    return np.where(small, 1.0, values)


def trigonometric_interpolation_matrix(theta: np.ndarray, m: int) -> np.ndarray:
    """
    Matriz que evalúa el interpolante trigonométrico de m valores nodales.

    Los nodos están en 2πk/m. El interpolante es exacto para polinomios
    trigonométricos de grado menor que m/2.

    Args:
        theta: Ángulos de evaluación, forma (q,)
        m: Número de nodos (par)

    Returns:
        np.ndarray: Matriz densa de forma (q, m)
    """
    if m % 2 != 0:
        raise ValueError(f"m debe ser par, recibido: {m}")
    nodes = 2.0 * np.pi * np.arange(m) / m
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return periodic_sinc(theta[:, None] - nodes[None, :], m)


def periodic_derivative(values: np.ndarray, period: float, order: int = 1) -> np.ndarray:
    """
    Derivada espectral de una función periódica muestreada uniformemente.

    Args:
        values: Muestras en nodos equiespaciados
        period: Periodo (perímetro)
        order: Orden de la derivada

    Returns:
        np.ndarray: Derivada en los mismos nodos
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    k = np.fft.fftfreq(m, d=1.0 / m)
    factor = (2j * np.pi * k / period) ** order
    if order % 2 == 1 and m % 2 == 0:
        factor[m // 2] = 0.0
    return np.real(np.fft.ifft(factor * np.fft.fft(values)))


def periodic_smooth3(values: np.ndarray) -> np.ndarray:
    """Filtro periódico de 3 nodos con pesos (1/4, 1/2, 1/4)."""
    values = np.asarray(values, dtype=float)
    return 0.25 * np.roll(values, 1) + 0.5 * values + 0.25 * np.roll(values, -1)


@dataclass(frozen=True)
class QuadraticOperators:
    """
    Operadores dispersos del interpolante cuadrático local.

    Cada matriz tiene forma (consultas, nodos interiores + nodos de borde)
    y actúa sobre el vector concatenado (valores interiores, traza).
    """
    value: sp.csr_matrix
    dx: sp.csr_matrix
    dy: sp.csr_matrix
    dxx: sp.csr_matrix
    dxy: sp.csr_matrix
    dyy: sp.csr_matrix


class LocalQuadraticInterpolator:
    """
    Interpolador cuadrático local por mínimos cuadrados ponderados.

    Para cada punto de consulta se toman los vecinos interiores y de borde
    más cercanos, se ajusta un polinomio de grado 2 con pesos gaussianos
    exp(-(d / 2h)^2) y se devuelven las filas que dan valor, gradiente y
    hessiano como combinaciones lineales de los valores nodales. El ajuste
    reproduce polinomios cuadráticos.
    """

    def __init__(self, interior_points: np.ndarray, boundary_points: Optional[np.ndarray],
                 scale: float, k_interior: int = DEFAULT_K_INTERIOR,
                 k_boundary: int = DEFAULT_K_BOUNDARY, ridge: float = DEFAULT_RIDGE) -> None:
        """
        Inicializa el interpolador.

        Args:
            interior_points: Nodos interiores, forma (n, 2)
            boundary_points: Nodos de borde, forma (m, 2) o None
            scale: Escala de longitud (paso de malla)
            k_interior: Vecinos interiores por consulta
            k_boundary: Vecinos de borde por consulta
            ridge: Regularización relativa de la matriz normal
        """
        if scale <= 0:
            raise ValueError(f"scale debe ser positivo, recibido: {scale}")
        self.interior_points = np.asarray(interior_points, dtype=float)
        self.boundary_points = (np.zeros((0, 2)) if boundary_points is None
                                else np.asarray(boundary_points, dtype=float))
        self.scale = float(scale)
        self.n_interior = len(self.interior_points)
        self.n_boundary = len(self.boundary_points)
        self.k_interior = min(k_interior, self.n_interior)
        self.k_boundary = min(k_boundary, self.n_boundary)
        if self.k_interior + self.k_boundary < 6:
            raise ValueError("Se necesitan al menos 6 nodos para un ajuste cuadrático")
        self.ridge = ridge
        self._tree_interior = cKDTree(self.interior_points)
        self._tree_boundary = cKDTree(self.boundary_points) if self.k_boundary > 0 else None
        self._all_points = np.vstack([self.interior_points, self.boundary_points])

    @property
    def n_nodes(self) -> int:
        """Número total de nodos (interiores + borde)."""
        return self.n_interior + self.n_boundary

    def _neighbors(self, queries: np.ndarray) -> np.ndarray:
        _, idx = self._tree_interior.query(queries, k=self.k_interior)
        idx = np.asarray(idx).reshape(len(queries), -1)
        if self.k_boundary > 0:
            _, idx_b = self._tree_boundary.query(queries, k=self.k_boundary)
            idx_b = np.asarray(idx_b).reshape(len(queries), -1) + self.n_interior
            idx = np.hstack([idx, idx_b])
        return idx

    def operators(self, queries: np.ndarray) -> QuadraticOperators:
        """
        Construye los operadores de valor, gradiente y hessiano.

        Args:
            queries: Puntos de consulta, forma (q, 2)

        Returns:
            QuadraticOperators: Matrices dispersas de forma (q, n_nodes)
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        n_q = len(queries)
        idx = self._neighbors(queries)
        k = idx.shape[1]

        local = (self._all_points[idx] - queries[:, None, :]) / self.scale
        X = local[..., 0]
        Y = local[..., 1]
        basis = np.stack([np.ones_like(X), X, Y, X * X, X * Y, Y * Y], axis=-1)
        weights = np.exp(-0.25 * (X * X + Y * Y))

        weighted_t = np.transpose(basis, (0, 2, 1)) * weights[:, None, :]
        normal = weighted_t @ basis
        trace = np.trace(normal, axis1=1, axis2=2)
        normal = normal + (self.ridge * trace / 6.0)[:, None, None] * np.eye(6)[None, :, :]
        coefficients = np.linalg.solve(normal, weighted_t)

        h = self.scale
        rows = np.repeat(np.arange(n_q), k)
        cols = idx.ravel()
        shape = (n_q, self.n_nodes)

        def _matrix(data: np.ndarray) -> sp.csr_matrix:
            return sp.csr_matrix((data.ravel(), (rows, cols)), shape=shape)

        return QuadraticOperators(
            value=_matrix(coefficients[:, 0, :]),
            dx=_matrix(coefficients[:, 1, :] / h),
            dy=_matrix(coefficients[:, 2, :] / h),
            dxx=_matrix(2.0 * coefficients[:, 3, :] / h ** 2),
            dxy=_matrix(coefficients[:, 4, :] / h ** 2),
            dyy=_matrix(2.0 * coefficients[:, 5, :] / h ** 2),
        )

    def evaluate(self, queries: np.ndarray, nodal_values: np.ndarray) -> np.ndarray:
        """Valores interpolados en los puntos de consulta."""
        return self.operators(queries).value @ np.asarray(nodal_values, dtype=float)

    def gradient(self, queries: np.ndarray, nodal_values: np.ndarray) -> np.ndarray:
        """Gradientes interpolados, forma (q, 2)."""
        ops = self.operators(queries)
        values = np.asarray(nodal_values, dtype=float)
        return np.column_stack([ops.dx @ values, ops.dy @ values])
