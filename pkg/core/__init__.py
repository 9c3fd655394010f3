"""
Núcleo numérico de MongeFlux.

Datos del problema, Dirichlet de Monge-Ampère, operador linealizado,
minimización de L y minimización de la energía E.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from .problem_data import ProblemData, StabilityReport, load_problem, check_stability_2d, require_stable
from .ma_dirichlet import GridFunction, solve_ma_dirichlet, hessian_cofactor, ma_residual
from .linearized_ma import LinearizedOperator, assemble, solve_v, solve_homogeneous, boundary_flux, check_barriers
from .minimizer import Solution, solve_problem_P, euler_lagrange_test, compactness_experiment
from .energy_min import EnergyProfileF, EnergyResult, default_F, minimize_E, verify_det_bounds

__all__ = [
    "ProblemData",
    "StabilityReport",
    "load_problem",
    "check_stability_2d",
    "require_stable",
    "GridFunction",
    "solve_ma_dirichlet",
    "hessian_cofactor",
    "ma_residual",
    "LinearizedOperator",
    "assemble",
    "solve_v",
    "solve_homogeneous",
    "boundary_flux",
    "check_barriers",
    "Solution",
    "solve_problem_P",
    "euler_lagrange_test",
    "compactness_experiment",
    "EnergyProfileF",
    "EnergyResult",
    "default_F",
    "minimize_E",
    "verify_det_bounds",
]
