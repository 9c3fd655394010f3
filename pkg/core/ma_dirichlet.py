"""
Problema de Dirichlet para la ecuación de Monge-Ampère.

Discretiza det D²u = f con un esquema monótono de esténcil ancho: el
determinante se aproxima por el mínimo, sobre marcos ortogonales del
esténcil, del producto de las segundas diferencias direccionales
(convexificadas). El sistema no lineal se resuelve con Newton amortiguado
y pasos de pseudo-tiempo como respaldo.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from loguru import logger
from scipy.sparse.linalg import spsolve

from geometry.domain_geometry import Discretization
from utils.config_utils import SolverConfig
from utils.validation_utils import DataValidationError, SolverDivergenceError

# Marcos ortogonales del esténcil (pares de direcciones de línea)
FRAME_PAIRS = (
    ((1, 0), (0, 1)),
    ((1, 1), (1, -1)),
    ((2, 1), (1, -2)),
    ((1, 2), (2, -1)),
)
CONVEXITY_TOL = 1e-6
EULER_STEPS = 25
ARMIJO_RESIDUAL = 1e-4

Field = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(eq=False)
class GridFunction:
    """
    Campo escalar sobre los nodos interiores con traza en los nodos de borde.

    Attributes:
        disc: Discretización de referencia
        values: Valores en los nodos interiores
        trace: Valores en los nodos de la cuadratura de borde
        convex: Indicador de convexidad certificada
        name: Nombre usado en los archivos de salida
    """
    disc: Discretization
    values: np.ndarray
    trace: np.ndarray
    convex: bool = False
    name: str = "u"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.trace = np.asarray(self.trace, dtype=float).ravel()
        if self.values.shape != (self.disc.n_nodes,):
            raise ValueError(
                f"values debe tener {self.disc.n_nodes} entradas, recibido: {self.values.shape}"
            )
        if self.trace.shape != (self.disc.m,):
            raise ValueError(f"trace debe tener {self.disc.m} entradas, recibido: {self.trace.shape}")

    @classmethod
    def from_function(cls, disc: Discretization, func: Callable[[np.ndarray], np.ndarray],
                      name: str = "u", convex: bool = False) -> 'GridFunction':
        """Muestrea una función de puntos (k, 2) en nodos interiores y de borde."""
        return cls(disc, func(disc.grid.points), func(disc.quad.points), convex=convex, name=name)

    @property
    def nodal(self) -> np.ndarray:
        """Vector concatenado (valores interiores, traza)."""
        return np.concatenate([self.values, self.trace])

    def with_values(self, values: np.ndarray, trace: Optional[np.ndarray] = None,
                    convex: bool = False, name: Optional[str] = None) -> 'GridFunction':
        """Copia con nuevos valores (y traza, si se da)."""
        return GridFunction(self.disc, values, self.trace if trace is None else trace,
                            convex=convex, name=name or self.name)

    def add_affine(self, slope: Sequence[float], offset: float = 0.0) -> 'GridFunction':
        """Suma la función afín offset + slope·x (conserva la convexidad)."""
        slope = np.asarray(slope, dtype=float)
        return GridFunction(
            self.disc,
            self.values + offset + self.disc.grid.points @ slope,
            self.trace + offset + self.disc.quad.points @ slope,
            convex=self.convex,
            name=self.name,
        )

    def second_differences(self) -> np.ndarray:
        """Segundas diferencias por línea, forma (L, N)."""
        return np.stack([op.apply(self.values, self.trace) for op in self.disc.second_differences])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Valores interpolados en puntos arbitrarios del dominio."""
        return self.disc.interpolator.evaluate(points, self.nodal)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Gradiente interpolado, forma (k, 2)."""
        return self.disc.interpolator.gradient(points, self.nodal)

    def boundary_values(self, s: np.ndarray) -> np.ndarray:
        """Traza interpolada trigonométricamente en parámetros de arco s."""
        return self.disc.trace_at(s, self.trace)

    def to_frames(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """
        Tablas de salida del campo.

        Returns:
            Tuple[pd.DataFrame, pd.DataFrame]: Nodos interiores (i, j, x, y, value)
            y traza (s, theta, value)
        """
        grid = self.disc.grid
        interior = pd.DataFrame({
            "i": grid.ij[:, 0],
            "j": grid.ij[:, 1],
            "x": grid.points[:, 0],
            "y": grid.points[:, 1],
            "value": self.values,
        })
        boundary = pd.DataFrame({
            "s": self.disc.quad.s,
            "theta": self.disc.quad.theta,
            "value": self.trace,
        })
        return interior, boundary


@dataclass
class HessianField:
    """
    Hessiano discreto, matriz de cofactores y determinante por nodo.

    Attributes:
        hessian: Matrices D²u, forma (N, 2, 2)
        cofactor: Matrices U = cof(D²u), forma (N, 2, 2)
        determinant: det D²u por nodo
    """
    hessian: np.ndarray
    cofactor: np.ndarray
    determinant: np.ndarray

    @property
    def trace(self) -> np.ndarray:
        """Traza de U (igual al laplaciano de u)."""
        return self.cofactor[:, 0, 0] + self.cofactor[:, 1, 1]

    def cofactor_eigenvalues(self) -> np.ndarray:
        """Autovalores de U por nodo, forma (N, 2) en orden creciente."""
        return np.linalg.eigvalsh(self.cofactor)


@dataclass
class SchemeState:
    """Estado del esquema monótono en un iterado."""
    differences: np.ndarray
    ma: np.ndarray
    choice: np.ndarray
    history: List[float] = field(default_factory=list)


def nodal_field(disc: Discretization, values: Field, name: str = "campo") -> np.ndarray:
    """
    Normaliza un campo dado como constante, arreglo nodal o función de puntos.

    Raises:
        ValueError: Si la forma no coincide con los nodos interiores
    """
    if callable(values):
        out = np.asarray(values(disc.grid.points), dtype=float)
    else:
        out = np.asarray(values, dtype=float)
        if out.ndim == 0:
            out = np.full(disc.n_nodes, float(out))
    if out.shape != (disc.n_nodes,):
        raise ValueError(f"{name} debe tener {disc.n_nodes} valores nodales, recibido: {out.shape}")
    return out


def boundary_field(disc: Discretization, values: Field, name: str = "traza") -> np.ndarray:
    """Normaliza datos de borde (constante, arreglo o función) a los nodos de cuadratura."""
    if callable(values):
        out = np.asarray(values(disc.quad.points), dtype=float)
    else:
        out = np.asarray(values, dtype=float)
        if out.ndim == 0:
            out = np.full(disc.m, float(out))
    if out.shape != (disc.m,):
        raise ValueError(f"{name} debe tener {disc.m} valores de borde, recibido: {out.shape}")
    return out


def active_frames(disc: Discretization) -> List[Tuple[int, int]]:
    """Índices de línea de los marcos ortogonales disponibles en la malla."""
    available = {tuple(d) for d in disc.grid.directions.tolist()}
    return [
        (disc.grid.line_index(a), disc.grid.line_index(b))
        for a, b in FRAME_PAIRS
        if a in available and b in available
    ]


def _differences(disc: Discretization, values: np.ndarray, trace: np.ndarray) -> np.ndarray:
    return np.stack([op.apply(values, trace) for op in disc.second_differences])


def _scheme(disc: Discretization, differences: np.ndarray,
            regularization: float) -> Tuple[np.ndarray, np.ndarray]:
    products = np.stack([
        np.maximum(differences[a], regularization) * np.maximum(differences[b], regularization)
        for a, b in active_frames(disc)
    ])
    choice = np.argmin(products, axis=0)
    return products[choice, np.arange(products.shape[1])], choice


def _jacobian(disc: Discretization, differences: np.ndarray, choice: np.ndarray,
              regularization: float) -> sp.csc_matrix:
    ops = disc.second_differences
    jac = sp.csr_matrix((disc.n_nodes, disc.n_nodes))
    for k, (a, b) in enumerate(active_frames(disc)):
        selected = (choice == k).astype(float)
        da = np.maximum(differences[a], regularization)
        db = np.maximum(differences[b], regularization)
        jac = jac + sp.diags(selected * db) @ ops[a].interior + sp.diags(selected * da) @ ops[b].interior
    return jac.tocsc()


def monotone_ma(u: GridFunction, regularization: float = 0.0) -> np.ndarray:
    """
    Evalúa el operador monótono MA_h(u) en los nodos interiores.

    Args:
        u: Campo con traza
        regularization: Cota inferior de las segundas diferencias

    Returns:
        np.ndarray: Aproximación nodal de det D²u
    """
    ma, _ = _scheme(u.disc, u.second_differences(), regularization)
    return ma


def poisson_initial_guess(disc: Discretization, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """
    Iterado inicial: solución de Δu = 2√f con u = g en el borde.

    Para f constante y borde circular coincide con el perfil radial exacto.
    """
    horizontal = disc.line((1, 0))
    vertical = disc.line((0, 1))
    laplacian = (horizontal.interior + vertical.interior).tocsc()
    rhs = 2.0 * np.sqrt(f) - (horizontal.boundary + vertical.boundary) @ g
    return spsolve(laplacian, rhs)


def _is_convex(differences: np.ndarray) -> bool:
    return bool(differences.min() >= -CONVEXITY_TOL)


def _euler_steps(disc: Discretization, values: np.ndarray, g: np.ndarray, f: np.ndarray,
                 state: SchemeState, regularization: float) -> np.ndarray:
    jac = _jacobian(disc, state.differences, state.choice, regularization)
    dt = 0.5 / np.abs(jac.diagonal()).max()
    for _ in range(EULER_STEPS):
        values = values + dt * (state.ma - f)
        state.differences = _differences(disc, values, g)
        state.ma, state.choice = _scheme(disc, state.differences, regularization)
    return values


def solve_ma_dirichlet(disc: Discretization, f: Field, g: Field,
                       opts: Optional[SolverConfig] = None,
                       initial: Optional[GridFunction] = None) -> GridFunction:
    """
    Resuelve det D²u = f en Ω con u = g en ∂Ω para u convexa.

    Args:
        disc: Discretización (dominio, malla y cuadratura)
        f: Lado derecho positivo (constante, arreglo nodal o función)
        g: Datos de Dirichlet en los nodos de borde
        opts: Opciones del resolvedor (tolerancia, iteraciones, amortiguamiento)
        initial: Iterado inicial opcional (por ejemplo, la solución anterior)

    Returns:
        GridFunction: Solución discreta con indicador de convexidad

    Raises:
        DataValidationError: Si f ≤ 0 en algún nodo
        SolverDivergenceError: Si Newton no alcanza la tolerancia
    """
    opts = opts or SolverConfig()
    f_nodes = nodal_field(disc, f, "f")
    g_nodes = boundary_field(disc, g, "g")
    if np.any(f_nodes <= 0):
        node = int(np.argmin(f_nodes))
        raise DataValidationError(
            f"f debe ser positiva en todos los nodos; mínimo {f_nodes[node]:.6g} en el nodo {node}",
            field_name="f", node=node, value=float(f_nodes[node]),
        )

    delta = opts.regularization
    values = (initial.values.copy() if initial is not None
              else poisson_initial_guess(disc, f_nodes, g_nodes))
    differences = _differences(disc, values, g_nodes)
    ma, choice = _scheme(disc, differences, delta)
    state = SchemeState(differences, ma, choice)

    for iteration in range(opts.max_newton_iterations + 1):
        residual = state.ma - f_nodes
        sup = float(np.abs(residual).max())
        state.history.append(sup)
        logger.debug(f"Newton MA iteración {iteration}: residuo sup={sup:.3e}")
        if sup <= opts.ma_tol or iteration == opts.max_newton_iterations:
            break

        jac = _jacobian(disc, state.differences, state.choice, delta)
        step = spsolve(jac, -residual)
        accepted = False
        if np.all(np.isfinite(step)):
            alpha = 1.0
            while alpha >= opts.min_damping:
                trial = values + alpha * step
                trial_diff = _differences(disc, trial, g_nodes)
                trial_ma, trial_choice = _scheme(disc, trial_diff, delta)
                if np.abs(trial_ma - f_nodes).max() < (1.0 - ARMIJO_RESIDUAL * alpha) * sup:
                    values = trial
                    state.differences, state.ma, state.choice = trial_diff, trial_ma, trial_choice
                    accepted = True
                    break
                alpha *= 0.5

        if not accepted:
            logger.warning(f"Newton sin descenso en la iteración {iteration}; pasos de pseudo-tiempo")
            values = _euler_steps(disc, values, g_nodes, f_nodes, state, delta)

    final = state.history[-1]
    if final > opts.ma_tol:
        raise SolverDivergenceError(
            f"Newton MA no convergió en {opts.max_newton_iterations} iteraciones "
            f"(residuo sup={final:.3e}, tolerancia {opts.ma_tol:.1e})",
            history=state.history,
        )

    logger.debug(f"MA resuelto en {len(state.history) - 1} iteraciones, residuo {final:.3e}")
    return GridFunction(disc, values, g_nodes, convex=_is_convex(state.differences), name="u")


def hessian_cofactor(u: GridFunction) -> HessianField:
    """
    Hessiano por diferencias (con correcciones de corte cerca del borde) y cofactores.

    Los términos cruzados salen de las diagonales: u₁₂ = (D₍₁,₁₎ − D₍₁,₋₁₎)/2.

    Args:
        u: Campo con traza

    Returns:
        HessianField: D²u, U y det D²u por nodo
    """
    disc = u.disc
    values, trace = u.values, u.trace
    u11 = disc.line((1, 0)).apply(values, trace)
    u22 = disc.line((0, 1)).apply(values, trace)
    u12 = 0.5 * (disc.line((1, 1)).apply(values, trace) - disc.line((1, -1)).apply(values, trace))

    hessian = np.empty((len(values), 2, 2))
    hessian[:, 0, 0] = u11
    hessian[:, 1, 1] = u22
    hessian[:, 0, 1] = hessian[:, 1, 0] = u12

    cofactor = np.empty_like(hessian)
    cofactor[:, 0, 0] = u22
    cofactor[:, 1, 1] = u11
    cofactor[:, 0, 1] = cofactor[:, 1, 0] = -u12
    return HessianField(hessian, cofactor, u11 * u22 - u12 * u12)


def ma_residual(u: GridFunction, f: Field) -> Tuple[float, float]:
    """
    Residuo del esquema monótono MA_h(u) − f.

    Returns:
        Tuple[float, float]: Norma del supremo y norma l¹ ponderada por área
    """
    residual = monotone_ma(u) - nodal_field(u.disc, f, "f")
    return float(np.abs(residual).max()), float(u.disc.grid.weights @ np.abs(residual))


def frame_choice(u: GridFunction, regularization: float = 0.0) -> np.ndarray:
    """Índice del marco ortogonal que realiza el mínimo del esquema en cada nodo."""
    _, choice = _scheme(u.disc, u.second_differences(), regularization)
    return choice
