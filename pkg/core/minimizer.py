"""
Minimización del funcional lineal L sobre soluciones de Monge-Ampère.

La variable de optimización es la traza g: cada iterado resuelve el
problema de Dirichlet de Monge-Ampère, el problema para v y el flujo de
borde, y desciende según el residuo de Euler-Lagrange σ + U^{νν}v_ν con
búsqueda lineal de Armijo sobre L.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from tqdm import tqdm

from core.linearized_ma import LinearizedOperator, assemble, boundary_flux, solve_homogeneous, solve_v
from core.ma_dirichlet import GridFunction, solve_ma_dirichlet
from core.problem_data import (
    ProblemData,
    StabilityReport,
    load_problem,
    normalize,
    require_stable,
)
from geometry.domain_geometry import Discretization
from utils.config_utils import DataConfig, SolverConfig
from utils.validation_utils import MongeFluxError, PreconditionError, SolverDivergenceError

DEFAULT_CREASE_SAMPLING = 32
RELATIVE_DECREASE_TOL = 1e-12
EL_TEST_MODES = 4


@dataclass(eq=False)
class Solution:
    """
    Par (u, v) del sistema de Euler-Lagrange con su historial.

    Attributes:
        u: Solución normalizada de Monge-Ampère
        v: Solución de U^{ij}v_{ij} = −A con v = 0 en el borde
        g: Traza normalizada de u
        L_value: Valor de L en u
        el_residual: σ + U^{νν}v_ν en los nodos de borde
        history: Tabla (iteration, L_value, residual_sup, step, boundary_integral)
        converged: Si el residuo alcanzó la tolerancia
        operator: Operador linealizado de u
    """
    u: GridFunction
    v: GridFunction
    g: np.ndarray
    L_value: float
    el_residual: np.ndarray
    history: pd.DataFrame
    converged: bool
    operator: LinearizedOperator

    @property
    def el_sup(self) -> float:
        """Norma del supremo del residuo de Euler-Lagrange."""
        return float(np.abs(self.el_residual).max())


@dataclass(eq=False)
class _Iterate:
    g: np.ndarray
    u: GridFunction
    op: LinearizedOperator
    v: GridFunction
    residual: np.ndarray
    L_value: float


def evaluate_L(u: GridFunction, data: ProblemData) -> float:
    """
    L(u) = ∮ u dσ − ∫ u dA por cuadratura.

    Args:
        u: Campo con traza
        data: Datos del problema

    Returns:
        float: Valor de L
    """
    disc = u.disc
    boundary = disc.quad.integrate(data.sigma * u.trace)
    _, weights = disc.area_rule
    interior = float((weights * data.A_area) @ (disc.area_value_operator @ u.nodal))
    return boundary - interior


def _iterate(data: ProblemData, g: np.ndarray, opts: SolverConfig,
             previous: Optional[GridFunction] = None) -> _Iterate:
    u = solve_ma_dirichlet(data.disc, data.f, g, opts, initial=previous)
    op = assemble(u, opts)
    v = solve_v(op, data.A_nodes, opts)
    residual = data.sigma + boundary_flux(u, v, smooth=opts.flux_filter)
    return _Iterate(g, u, op, v, residual, evaluate_L(u, data))


def _weighted_norm2(data: ProblemData, r: np.ndarray) -> float:
    return float(data.disc.quad.weights @ (r * r / data.sigma))


def solve_problem_P(data: ProblemData, opts: Optional[SolverConfig] = None,
                    initial_g: Optional[np.ndarray] = None,
                    stability: Optional[StabilityReport] = None) -> Solution:
    """
    Minimiza L(u) sobre las trazas g con det D²u = f.

    Cada paso desciende en la dirección −(σ + U^{νν}v_ν)/σ con búsqueda
    lineal hacia atrás (Armijo, mitades). Si la búsqueda agota el paso
    mínimo se devuelve el mejor iterado marcado como no convergido.

    Args:
        data: Datos estables del problema
        opts: Opciones del resolvedor
        initial_g: Traza inicial (por defecto g = 0)
        stability: Informe de estabilidad ya calculado

    Returns:
        Solution: Minimizador normalizado con historial

    Raises:
        PreconditionError: Si los datos no son estables
        SolverDivergenceError: Si falla el resolvedor de Monge-Ampère interno
    """
    opts = opts or SolverConfig()
    if stability is None:
        require_stable(data, DEFAULT_CREASE_SAMPLING, DEFAULT_CREASE_SAMPLING)
    elif not stability.stable:
        raise PreconditionError(f"Los datos no son estables (mu_hat={stability.mu_hat})")

    disc = data.disc
    g = np.zeros(disc.m) if initial_g is None else np.asarray(initial_g, dtype=float).copy()
    try:
        current = _iterate(data, g, opts)
    except SolverDivergenceError as e:
        raise SolverDivergenceError(f"Iteración externa 0: {e}", history=e.history) from e

    tolerance = opts.tol_el * float(np.abs(data.sigma).max())
    step = opts.initial_step
    rows: List[Dict[str, float]] = []
    converged = False
    stalled = False

    for iteration in range(opts.max_outer_iterations + 1):
        sup = float(np.abs(current.residual).max())
        normalized = normalize(current.u)
        rows.append({
            "iteration": iteration,
            "L_value": current.L_value,
            "residual_sup": sup,
            "step": step if iteration else 0.0,
            "boundary_integral": disc.quad.integrate(data.sigma * normalized.trace),
        })
        logger.debug(f"Iteración externa {iteration}: L={current.L_value:.10g}, residuo={sup:.3e}")
        if sup <= tolerance:
            converged = True
            break
        if stalled or iteration == opts.max_outer_iterations:
            break

        direction = -current.residual / data.sigma
        decrease = _weighted_norm2(data, current.residual)
        alpha = min(2.0 * step, opts.initial_step)
        accepted = None
        while alpha >= opts.min_step:
            try:
                trial = _iterate(data, current.g + alpha * direction, opts, previous=current.u)
            except MongeFluxError as e:
                logger.debug(f"Paso {alpha:.3e} rechazado: {e}")
                alpha *= 0.5
                continue
            if trial.L_value <= current.L_value - opts.armijo * alpha * decrease:
                accepted = trial
                break
            alpha *= 0.5

        if accepted is None:
            logger.warning(f"Búsqueda lineal agotada en la iteración {iteration}; resultado no convergido")
            break
        relative = (current.L_value - accepted.L_value) / max(abs(current.L_value), 1.0)
        step = alpha
        current = accepted
        if relative < RELATIVE_DECREASE_TOL:
            logger.info(f"Descenso relativo de L {relative:.2e} < {RELATIVE_DECREASE_TOL:g}; parada")
            stalled = True

    u = normalize(current.u)
    history = pd.DataFrame(rows, columns=["iteration", "L_value", "residual_sup", "step", "boundary_integral"])
    solution = Solution(
        u=u,
        v=current.v,
        g=u.trace.copy(),
        L_value=evaluate_L(u, data),
        el_residual=current.residual,
        history=history,
        converged=converged,
        operator=current.op,
    )
    status = "convergido" if converged else "no convergido"
    logger.info(f"Problema (P) {status}: L={solution.L_value:.10g}, residuo EL={solution.el_sup:.3e}")
    return solution


def el_residual(sol: Solution, data: ProblemData, smooth: bool = False) -> Tuple[float, np.ndarray]:
    """
    Residuo de Euler-Lagrange σ + U^{νν}v_ν de una solución.

    Returns:
        Tuple[float, np.ndarray]: Supremo y perfil en los nodos de borde
    """
    profile = data.sigma + boundary_flux(sol.u, sol.v, smooth=smooth)
    return float(np.abs(profile).max()), profile


def euler_lagrange_test(sol: Solution, data: ProblemData, n_tests: int = 20,
                        seed: int = 12345, opts: Optional[SolverConfig] = None,
                        show_progress: bool = False) -> pd.DataFrame:
    """
    Comprueba L(φ) = 0 para funciones U-armónicas φ.

    Las dos primeras filas usan φ ≡ 1 y φ = cos θ en el borde; el resto,
    polinomios trigonométricos aleatorios de grado bajo.

    Args:
        sol: Solución convergida
        data: Datos del problema
        n_tests: Número total de pruebas
        seed: Semilla del generador
        opts: Opciones del sistema lineal
        show_progress: Muestra una barra de progreso

    Returns:
        pd.DataFrame: (test, L_phi, phi_norm, normalized)
    """
    rng = np.random.default_rng(seed)
    theta = data.disc.quad.theta
    boundaries = [("constant", np.ones_like(theta)), ("cos_theta", np.cos(theta))]
    for k in range(max(n_tests - 2, 0)):
        modes = np.arange(EL_TEST_MODES + 1)
        a = rng.standard_normal(modes.size) / (1.0 + modes)
        b = rng.standard_normal(modes.size) / (1.0 + modes)
        values = np.cos(np.outer(theta, modes)) @ a + np.sin(np.outer(theta, modes)) @ b
        boundaries.append((f"random_{k}", values))

    rows = []
    for name, trace in tqdm(boundaries[:n_tests], desc="Euler-Lagrange", disable=not show_progress):
        phi = solve_homogeneous(sol.operator, trace, opts)
        L_phi = evaluate_L(phi, data)
        norm = data.disc.quad.integrate(np.abs(trace) * data.sigma)
        rows.append({"test": name, "L_phi": L_phi, "phi_norm": norm, "normalized": abs(L_phi) / norm})
    return pd.DataFrame(rows)


def _solve_member(label: Any, data: ProblemData, opts: SolverConfig) -> Tuple[Any, Optional[Solution], str]:
    try:
        return label, solve_problem_P(data, opts), ""
    except MongeFluxError as e:
        return label, None, str(e)


def compactness_experiment(data_sequence: Sequence[ProblemData], limit: ProblemData,
                           labels: Optional[Sequence[Any]] = None,
                           opts: Optional[SolverConfig] = None,
                           deltas: Sequence[float] = (0.1, 0.2),
                           n_jobs: int = 1) -> pd.DataFrame:
    """
    Distancias entre los minimizadores de una sucesión de datos y el del límite.

    Args:
        data_sequence: Datos de la sucesión
        limit: Datos límite
        labels: Etiquetas de las filas (por defecto 1..k)
        opts: Opciones del resolvedor
        deltas: Profundidades δ de los subdominios {dist ≥ δ}
        n_jobs: Trabajos paralelos (joblib)

    Returns:
        pd.DataFrame: Fila por miembro con sup|u_k − u_∞| por δ y convergencia
    """
    opts = opts or SolverConfig()
    labels = list(labels) if labels is not None else list(range(1, len(data_sequence) + 1))
    limit_solution = solve_problem_P(limit, opts)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_solve_member)(label, data, opts) for label, data in zip(labels, data_sequence)
    )

    disc = limit.disc
    dist = disc.domain.distance(disc.grid.points)
    rows = []
    for label, solution, error in results:
        row: Dict[str, Any] = {"k": label, "converged": bool(solution is not None and solution.converged)}
        for delta in deltas:
            mask = dist >= delta
            row[f"sup_delta_{delta:g}"] = (
                float(np.abs(solution.u.values[mask] - limit_solution.u.values[mask]).max())
                if solution is not None else float("nan")
            )
        row["L_value"] = solution.L_value if solution is not None else float("nan")
        row["error"] = error
        rows.append(row)
        if error:
            logger.warning(f"Miembro {label} falló: {error}")
    return pd.DataFrame(rows)


def perturbation_sequence(base: DataConfig, disc: Discretization, k_values: Sequence[int],
                          perturbation: str = "f") -> Tuple[List[ProblemData], ProblemData]:
    """
    Sucesión de datos perturbados con amplitud 1/k y su límite.

    Con perturbation = "f" usa f_k = f + sin(πx₁)/k; con "sigma",
    σ_k = σ + cos(θ)/k. A se reequilibra en cada miembro.

    Raises:
        ValueError: Si la familia base no admite la perturbación
    """
    limit_config = DataConfig(**{**base.__dict__, "auto_balance": True})
    sequence = []
    for k in k_values:
        if perturbation == "f":
            if base.f["kind"] not in ("constant", "affine"):
                raise ValueError(f"f debe ser constante o afín para perturbarla, recibido: {base.f['kind']}")
            params = {"kind": "affine", "value": base.f["value"],
                    "gradient": base.f.get("gradient", [0.0, 0.0]),
                    "terms": list(base.f.get("terms", [])) + [{"kx": 1.0, "ky": 0.0, "sin": 1.0 / k}]}
            member = DataConfig(**{**limit_config.__dict__, "f": params})
        elif perturbation == "sigma":
            if base.sigma["kind"] not in ("constant", "fourier"):
                raise ValueError(f"sigma debe ser constante o Fourier, recibido: {base.sigma['kind']}")
            constant = base.sigma.get("value", base.sigma.get("constant", 1.0))
            cos = list(base.sigma.get("cos", [])) or [0.0]
            cos[0] = cos[0] + 1.0 / k
            params = {"kind": "fourier", "constant": constant, "cos": cos, "sin": list(base.sigma.get("sin", []))}
            member = DataConfig(**{**limit_config.__dict__, "sigma": params})
        else:
            raise ValueError(f"perturbation debe ser 'f' o 'sigma', recibido: {perturbation}")
        sequence.append(load_problem(member, disc))
    return sequence, load_problem(limit_config, disc)
