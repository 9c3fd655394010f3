"""
Minimización de la energía E(u) = ∫F(det D²u) + L(u).

Resuelve el sistema acoplado alternando el problema con determinante
prescrito y la actualización f ← (F′)⁻¹(−v), recortada a [t1, t0].
Incluye la F por defecto con corte logarítmico, la verificación de las
hipótesis sobre F y las comprobaciones de las cotas del determinante, de
la cota integral de tipo Aleksandrov y del error de linealización.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from core.ma_dirichlet import (
    Field,
    GridFunction,
    active_frames,
    frame_choice,
    monotone_ma,
    nodal_field,
    solve_ma_dirichlet,
)
from core.minimizer import Solution, evaluate_L, solve_problem_P
from core.problem_data import ProblemData, StabilityReport, require_stable
from utils.config_utils import EnergyConfig, SolverConfig
from utils.validation_utils import PreconditionError, SolverDivergenceError, ValidationReport

HYPOTHESIS_SAMPLES = 400
DEFAULT_CREASE_SAMPLING = 32
MAX_ENERGY_BACKTRACKS = 5


class EnergyProfileF:
    """
    Integrando F de la energía con su derivada y la inversa de F′ en (0, t0].

    Attributes:
        t0: Umbral (F = 0 en [t0, ∞))
        t1_floor: Piso del recorte de la actualización de f
        kind: default o tabulated
        hypotheses: Registro de verificación de las hipótesis
    """

    def __init__(self, t0: float, F: Callable[[np.ndarray], np.ndarray],
                 dF: Callable[[np.ndarray], np.ndarray],
                 inverse_dF: Callable[[np.ndarray], np.ndarray],
                 t1_floor_ratio: float = 0.01, kind: str = "default") -> None:
        if not t0 > 0:
            raise ValueError(f"t0 debe ser positivo, recibido: {t0}")
        self.t0 = float(t0)
        self.t1_floor = float(t1_floor_ratio * t0)
        self._F = F
        self._dF = dF
        self._inverse_dF = inverse_dF
        self.kind = kind
        self.hypotheses = check_F_hypotheses(self)

    def F(self, t: np.ndarray) -> np.ndarray:
        return self._F(np.asarray(t, dtype=float))

    def dF(self, t: np.ndarray) -> np.ndarray:
        return self._dF(np.asarray(t, dtype=float))

    def inverse_dF(self, y: np.ndarray) -> np.ndarray:
        """(F′)⁻¹(y) para y ≤ 0; los valores y ≥ 0 se envían a t0."""
        y = np.minimum(np.asarray(y, dtype=float), 0.0)
        return self._inverse_dF(y)


def default_F(t0: float, t1_floor_ratio: float = 0.01) -> EnergyProfileF:
    """
    F(t) = log(t0/t) + t/t0 − 1 en (0, t0] y 0 en [t0, ∞).

    Args:
        t0: Umbral positivo
        t1_floor_ratio: Piso del recorte relativo a t0

    Returns:
        EnergyProfileF: Perfil con (F′)⁻¹(−s) = 1/(s + 1/t0)
    """
    def F(t):
        t = np.asarray(t, dtype=float)
        safe = np.minimum(t, t0)
        return np.where(t < t0, np.log(t0 / safe) + safe / t0 - 1.0, 0.0)

    def dF(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < t0, -1.0 / np.minimum(t, t0) + 1.0 / t0, 0.0)

    def inverse_dF(y):
        return 1.0 / (1.0 / t0 - y)

    return EnergyProfileF(t0, F, dF, inverse_dF, t1_floor_ratio, kind="default")


def tabulated_F(path: Union[str, Path], t0: float, t1_floor_ratio: float = 0.01) -> EnergyProfileF:
    """
    F tabulada en CSV con columnas (t, F, dF), interpolada con splines de Hermite.

    Fuera del rango tabulado por la derecha F se extiende por 0.

    Raises:
        ValueError: Si el archivo no tiene las columnas requeridas
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"Archivo de F no encontrado: {path}")
    frame = pd.read_csv(path)
    missing = {"t", "F", "dF"} - set(frame.columns)
    if missing:
        raise ValueError(f"Columnas faltantes en {path}: {sorted(missing)}")
    frame = frame.sort_values("t")
    t = frame["t"].to_numpy(dtype=float)
    spline = CubicHermiteSpline(t, frame["F"].to_numpy(dtype=float), frame["dF"].to_numpy(dtype=float))
    derivative = spline.derivative()
    t_min, t_max = float(t[0]), float(t[-1])

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > t_max, 0.0, spline(np.clip(x, t_min, t_max)))

    def dF(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > t_max, 0.0, derivative(np.clip(x, t_min, t_max)))

    def inverse_dF(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        lo_value = float(derivative(t_min))
        for k, target in enumerate(y):
            if target >= 0.0:
                out[k] = t0
            elif target <= lo_value:
                out[k] = t_min
            else:
                out[k] = brentq(lambda s: float(derivative(s)) - target, t_min, t0)
        return out

    return EnergyProfileF(t0, F, dF, inverse_dF, t1_floor_ratio, kind="tabulated")


def check_F_hypotheses(F: EnergyProfileF) -> ValidationReport:
    """
    Verifica numéricamente las hipótesis sobre F en dimensión 2.

    F′(t0) = 0, F′ ≤ 0 y estrictamente creciente en (0, t0], F = 0 en
    [t0, ∞), G(s) = F(s²) convexa y G′(0⁺) = −∞ (crecimiento como 1/s).
    """
    report = ValidationReport()
    t0 = F.t0
    t = np.geomspace(1e-4 * t0, t0, HYPOTHESIS_SAMPLES)
    dF = F.dF(t)
    beyond = np.linspace(t0, 10.0 * t0, 50)

    report.add_check("dF_at_t0", abs(float(F.dF(np.array([t0]))[0])), 1e-8)
    report.add_check("dF_max", float(dF.max()), 1e-12)
    report.add_check("dF_increasing", float(np.diff(dF[:-1]).min()), 0.0, upper=False)
    report.add_check("F_beyond_t0", float(np.abs(F.F(beyond)).max()), 1e-12)

    s = np.sqrt(t)
    G_prime = 2.0 * s * dF
    report.add_check("G_convex", float(np.diff(G_prime).min()), -1e-12, upper=False)
    # G′ crece al menos como 1/s cerca de 0
    report.add_check("G_prime_blowup", float(G_prime[0] / G_prime[HYPOTHESIS_SAMPLES // 8]), 1.5, upper=False)
    return report


@dataclass
class EnergyResult:
    """
    Resultado de la minimización de la energía.

    Attributes:
        u: Minimizador normalizado
        v: Campo v asociado
        f_out: Determinante final
        history: Tabla por iteración externa
        converged: Si se alcanzó el punto fijo
        clamp_active: Si el piso t1 quedó activo
        fixed_point_gap: sup|v + F′(f_out)|
        energy: Valor final de E
        solution: Último resultado del problema con determinante prescrito
    """
    u: GridFunction
    v: GridFunction
    f_out: np.ndarray
    history: pd.DataFrame
    converged: bool
    clamp_active: bool
    fixed_point_gap: float
    energy: float
    solution: Optional[Solution] = None


def energy_value(F: EnergyProfileF, f: np.ndarray, L_value: float, weights: np.ndarray) -> float:
    """E = ∫F(f) + L(u) con los pesos de área de la malla."""
    return float(weights @ F.F(f)) + L_value


def _energy_step(data: ProblemData, F: EnergyProfileF, f: np.ndarray, target: np.ndarray,
                 omega: float, energy: float, solver: SolverConfig, stability: StabilityReport,
                 g: np.ndarray) -> Optional[Tuple[np.ndarray, Solution, float, int]]:
    """
    Busca f + ω(target − f) con E no mayor que la actual, partiendo ω a la
    mitad tras cada rechazo.

    Returns:
        Tuple o None: (f, solución, E, reducciones) del paso aceptado, o None
        si ninguno reduce E
    """
    weights = data.disc.grid.weights
    for backtracks in range(MAX_ENERGY_BACKTRACKS + 1):
        trial_f = f + omega * 0.5 ** backtracks * (target - f)
        try:
            trial = solve_problem_P(data.with_f(trial_f), solver, initial_g=g, stability=stability)
        except SolverDivergenceError as e:
            logger.debug(f"Paso de energía rechazado (ω={omega * 0.5 ** backtracks:g}): {e}")
            continue
        trial_energy = energy_value(F, trial_f, trial.L_value, weights)
        if trial_energy <= energy:
            return trial_f, trial, trial_energy, backtracks
        logger.debug(f"Paso de energía rechazado (ω={omega * 0.5 ** backtracks:g}): "
                     f"E={trial_energy:.10g} > {energy:.10g}")
    return None


def minimize_E(data: ProblemData, F: EnergyProfileF, opts: Optional[EnergyConfig] = None,
               solver: Optional[SolverConfig] = None,
               stability: Optional[StabilityReport] = None) -> EnergyResult:
    """
    Minimiza E alternando el problema (P) y la actualización de f.

    Si el desajuste del punto fijo crece entre iteraciones se activa la
    relajación configurada. Solo se aceptan actualizaciones de f que no
    aumentan E; si ninguna lo consigue la iteración se detiene.

    Args:
        data: Datos (σ, A) equilibrados y estables
        F: Integrando con hipótesis verificadas
        opts: Opciones de energía
        solver: Opciones de los resolvedores internos
        stability: Informe de estabilidad ya calculado

    Returns:
        EnergyResult: Minimizador, f_out e historial

    Raises:
        PreconditionError: Si F no cumple las hipótesis o los datos no son estables
    """
    opts = opts or EnergyConfig(t0=F.t0)
    solver = solver or SolverConfig()
    if not F.hypotheses.passed:
        failed = ", ".join(r.name for r in F.hypotheses.get_failed_results())
        raise PreconditionError(f"F no cumple las hipótesis: {failed}")

    disc = data.disc
    weights = disc.grid.weights
    A_nodes = data.A_nodes
    if np.all(A_nodes == 0):
        logger.warning("A nula: v = 0 y f = t0 (caso degenerado)")
        f_out = np.full(disc.n_nodes, F.t0)
        u = solve_ma_dirichlet(disc, f_out, np.zeros(disc.m), solver)
        v = GridFunction(disc, np.zeros(disc.n_nodes), np.zeros(disc.m), name="v")
        energy = energy_value(F, f_out, evaluate_L(u, data), weights)
        history = pd.DataFrame([{"iteration": 0, "energy": energy, "fixed_point_gap": 0.0, "el_sup": np.nan,
                                 "relaxation": 1.0, "backtracks": 0, "f_min": F.t0, "f_max": F.t0}])
        return EnergyResult(u, v, f_out, history, True, False, 0.0, energy)

    if stability is None:
        stability = require_stable(data, DEFAULT_CREASE_SAMPLING, DEFAULT_CREASE_SAMPLING)

    f = np.full(disc.n_nodes, F.t0)
    omega = 1.0
    previous_gap = np.inf
    rows = []
    converged = False
    solution = solve_problem_P(data.with_f(f), solver, stability=stability)
    energy = energy_value(F, f, solution.L_value, weights)
    gap = float(np.abs(solution.v.values + F.dF(f)).max())
    backtracks = 0

    def record(iteration: int) -> None:
        rows.append({
            "iteration": iteration,
            "energy": energy,
            "fixed_point_gap": gap,
            "el_sup": solution.el_sup,
            "relaxation": omega,
            "backtracks": backtracks,
            "f_min": float(f.min()),
            "f_max": float(f.max()),
        })

    for iteration in range(opts.max_iterations):
        record(iteration)
        logger.info(f"Energía iteración {iteration}: E={energy:.10g}, desajuste={gap:.3e}")
        if gap <= opts.tol and solution.converged:
            converged = True
            break

        if gap > previous_gap and omega == 1.0:
            omega = opts.relaxation
            logger.warning(f"Actualización de f oscilante; relajación {omega:g} activada")
        previous_gap = gap
        target = np.clip(F.inverse_dF(-solution.v.values), F.t1_floor, F.t0)
        step = _energy_step(data, F, f, target, omega, energy, solver, stability, solution.g)
        if step is None:
            logger.warning(f"Ninguna actualización de f reduce E tras {MAX_ENERGY_BACKTRACKS} reducciones; "
                           f"se detiene en E={energy:.10g}")
            break
        f, solution, energy, backtracks = step
        gap = float(np.abs(solution.v.values + F.dF(f)).max())
    else:
        record(opts.max_iterations)

    if not converged:
        logger.warning(f"Minimización de energía no convergida (desajuste {gap:.3e})")

    clamp_active = bool(np.any(f <= F.t1_floor * (1.0 + 1e-12)))
    return EnergyResult(
        u=solution.u,
        v=solution.v,
        f_out=f,
        history=pd.DataFrame(rows),
        converged=converged,
        clamp_active=clamp_active,
        fixed_point_gap=gap,
        energy=energy,
        solution=solution,
    )


@dataclass
class DetBoundsReport:
    """Rango nodal de det D²u frente a [t1_floor, t0]."""
    min_det: float
    max_det: float
    passed: bool
    clamp_active: bool


def verify_det_bounds(u: GridFunction, F: EnergyProfileF, tol: float = 1e-6,
                      f_out: Optional[np.ndarray] = None) -> DetBoundsReport:
    """
    Comprueba t1_floor − tol ≤ det D²u ≤ t0 + tol nodo a nodo.

    Args:
        u: Minimizador de la energía
        F: Integrando
        tol: Tolerancia
        f_out: Determinante final (para informar si el piso estuvo activo)

    Returns:
        DetBoundsReport: Rango y veredicto
    """
    det = monotone_ma(u)
    lo, hi = float(det.min()), float(det.max())
    clamp = bool(f_out is not None and np.any(np.asarray(f_out) <= F.t1_floor * (1.0 + 1e-12)))
    passed = bool(lo >= F.t1_floor - tol and hi <= F.t0 + tol and lo > 0)
    return DetBoundsReport(lo, hi, passed, clamp)


@dataclass
class AlexandrovReport:
    """Cociente ∫φ g / ∫h g de la cota integral."""
    ratio: float
    bound: float
    passed: bool
    degenerate: bool


def alexandrov_check(w: GridFunction, h_bump: Field, bound: float = 0.75,
                     opts: Optional[SolverConfig] = None) -> AlexandrovReport:
    """
    Perturba la raíz del determinante de w y mide la respuesta integral.

    Con g = (det D²w)^{1/2}, resuelve det D²(w + φ) = (g − h)² con los mismos
    datos de borde y devuelve ∫φ g / ∫h g.

    Raises:
        PreconditionError: Si g − h ≤ 0 en algún nodo
    """
    disc = w.disc
    weights = disc.grid.weights
    g = np.sqrt(np.maximum(monotone_ma(w), 0.0))
    h = nodal_field(disc, h_bump, "h")
    denominator = float(weights @ (h * g))
    if denominator == 0.0:
        return AlexandrovReport(0.0, bound, True, True)
    reduced = g - h
    if np.any(reduced <= 0):
        raise PreconditionError(f"Determinante perturbado no positivo (mínimo de g − h {reduced.min():.3e})")

    perturbed = solve_ma_dirichlet(disc, reduced ** 2, w.trace, opts, initial=w)
    phi = perturbed.values - w.values
    ratio = float(weights @ (phi * g)) / denominator
    return AlexandrovReport(ratio, bound, bool(ratio <= bound), False)


def _frame_terms(w: GridFunction, phi: GridFunction, choice: np.ndarray):
    Dw = w.second_differences()
    Dp = phi.second_differences()
    linear = np.zeros(w.disc.n_nodes)
    quadratic = np.zeros(w.disc.n_nodes)
    for k, (a, b) in enumerate(active_frames(w.disc)):
        selected = choice == k
        linear[selected] = (Dw[b] * Dp[a] + Dw[a] * Dp[b])[selected]
        quadratic[selected] = (Dp[a] * Dp[b])[selected]
    return linear, quadratic


def linearization_check(w: GridFunction, h: Field, eps_values: Sequence[float] = (0.04, 0.02, 0.01),
                        opts: Optional[SolverConfig] = None) -> pd.DataFrame:
    """
    Error de linealización ∫|h − W^{ij}φ_{ij}| para det D²(w + εφ) = det D²w + εh.

    W^{ij}φ_{ij} se evalúa en el marco del esquema activo en w + εφ, donde
    la diferencia con h es ε veces el determinante discreto de φ.

    Args:
        w: Campo convexo de referencia
        h: Perturbación del determinante (|h| ≤ 1)
        eps_values: Barrido de ε
        opts: Opciones del resolvedor

    Returns:
        pd.DataFrame: (eps, gap, gap_over_eps, one_sided_min, fitted_C, det_phi_integral, convex)
    """
    disc = w.disc
    weights = disc.grid.weights
    h_nodes = nodal_field(disc, h, "h")
    base = monotone_ma(w)
    rows = []
    for eps in eps_values:
        if not np.any(h_nodes):
            rows.append({"eps": eps, "gap": 0.0, "gap_over_eps": 0.0, "one_sided_min": 0.0,
                         "fitted_C": 0.0, "det_phi_integral": 0.0, "convex": True})
            continue
        perturbed = solve_ma_dirichlet(disc, base + eps * h_nodes, w.trace, opts, initial=w)
        phi = GridFunction(disc, (perturbed.values - w.values) / eps, np.zeros(disc.m), name="phi")
        linear, quadratic = _frame_terms(w, phi, frame_choice(perturbed))
        difference = linear - h_nodes
        gap = float(weights @ np.abs(difference))
        rows.append({
            "eps": eps,
            "gap": gap,
            "gap_over_eps": gap / eps,
            "one_sided_min": float(difference.min()),
            "fitted_C": float(max(-difference.min(), 0.0) / eps),
            "det_phi_integral": float(weights @ quadratic),
            "convex": perturbed.convex,
        })
        if not perturbed.convex:
            logger.warning(f"w + εφ pierde convexidad en ε={eps:g}")
    return pd.DataFrame(rows)


def load_F(config: EnergyConfig) -> EnergyProfileF:
    """F por defecto o tabulada según la configuración."""
    if config.table_path:
        return tabulated_F(config.table_path, config.t0, config.t1_floor_ratio)
    return default_F(config.t0, config.t1_floor_ratio)
