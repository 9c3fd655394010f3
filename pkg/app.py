"""MongeFlux - Minimización de funcionales lineales con restricción de Monge-Ampère

Interfaz de línea de comandos: cada subcomando lee una configuración TOML,
ejecuta su tubería numérica y deja en un directorio de ejecución la
configuración efectiva, las tablas CSV, un resumen clave=valor y el log.

Códigos de salida: 0 si la ejecución converge, 2 si termina sin converger,
1 ante cualquier error.

Autor: MongeFlux Team
Versión: 1.0.0"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from analysis.diagnostics import (
    boundary_profile,
    chord_functional,
    chord_identity,
    crease_identity_check,
    height_lemma_check,
    interior_sections,
    quadratic_separation,
    tangent_chord,
)
from analysis.pogorelov import run_pogorelov
from core.energy_min import (
    alexandrov_check,
    check_F_hypotheses,
    linearization_check,
    load_F,
    minimize_E,
    verify_det_bounds,
)
from core.linearized_ma import check_barriers
from core.ma_dirichlet import monotone_ma
from core.minimizer import (
    Solution,
    compactness_experiment,
    euler_lagrange_test,
    perturbation_sequence,
    solve_problem_P,
)
from core.problem_data import ProblemData, check_stability_2d, load_problem
from geometry.domain_geometry import build_discretization
from utils.config_utils import (
    RunConfig,
    get_global_config,
    get_runtime_config,
    merge_configs,
    save_config_to_file,
    set_global_config,
)
from utils.file_utils import create_run_directory, get_output_directory, write_csv, write_summary
from utils.validation_utils import MongeFluxError, PreconditionError, ValidationReport

# Constantes de la aplicación
APP_NAME = "mongeflux"
APP_DESCRIPTION = "Minimización de L(u) = ∮u dσ − ∫u dA con det D²u prescrito"
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EFFECTIVE_CONFIG = "effective_config.toml"
SUMMARY_FILE = "summary.txt"
LOG_FILE = "run.log"
LOG_FORMAT = "{time:HH:mm:ss} | {level: <8} | {name}:{function} - {message}"
ALEXANDROV_RADIUS = 0.5
ALEXANDROV_FRACTION = 0.25

RunResult = Tuple[Dict[str, Any], Dict[str, pd.DataFrame], bool]


def setup_logging(level: str, run_dir: Optional[Path] = None) -> None:
    """
    Configura los destinos de loguru: stderr al nivel pedido y run.log en el directorio.

    Args:
        level: Nivel para stderr
        run_dir: Directorio de la ejecución (opcional)
    """
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    if run_dir is not None:
        logger.add(run_dir / LOG_FILE, level="DEBUG", format=LOG_FORMAT, mode="w")


def _prepare(config: RunConfig) -> ProblemData:
    disc = build_discretization(config.domain, config.grid)
    return load_problem(config.data, disc)


def _base_summary(config: RunConfig) -> Dict[str, Any]:
    return {
        "name": config.name,
        "seed": config.system.seed,
        "grid_n": config.grid.n,
        "boundary_m": config.grid.m,
    }


def _solution_tables(solution: Solution) -> Dict[str, pd.DataFrame]:
    u_interior, u_boundary = solution.u.to_frames()
    v_interior, _ = solution.v.to_frames()
    theta = solution.u.disc.quad.theta
    return {
        "u": u_interior,
        "u_boundary": u_boundary,
        "v": v_interior,
        "history": solution.history,
        "el_residual": pd.DataFrame({"theta": theta, "residual": solution.el_residual}),
    }


def cmd_check_stability(config: RunConfig) -> RunResult:
    """Criterio de estabilidad con funciones pliegue; informa y no falla si los datos son inestables."""
    data = _prepare(config)
    diag = config.diagnostics
    report = check_stability_2d(data, diag.n_directions, diag.n_offsets, diag.stability_tol, config.system.n_jobs)
    summary = {**_base_summary(config), **report.to_summary()}
    return summary, {"creases": report.values}, True


def cmd_solve(config: RunConfig) -> RunResult:
    """Resuelve el problema (P) y escribe u, v, el historial y el residuo de Euler-Lagrange."""
    data = _prepare(config)
    diag = config.diagnostics
    stability = check_stability_2d(data, diag.n_directions, diag.n_offsets, diag.stability_tol, config.system.n_jobs)
    solution = solve_problem_P(data, config.solver, stability=stability)
    summary = {
        **_base_summary(config),
        "L_value": solution.L_value,
        "el_residual_sup": solution.el_sup,
        "mu_hat": stability.mu_hat,
        "converged": solution.converged,
        "iterations": int(len(solution.history)),
    }
    return summary, _solution_tables(solution), solution.converged


def _chord_rows(solution: Solution, config: RunConfig) -> pd.DataFrame:
    disc = solution.u.disc
    n_chords = config.diagnostics.n_chords
    half_lengths = np.linspace(0.1, 0.8, n_chords) * disc.domain.diameter / 2.0
    rows = []
    for k, h in enumerate(half_lengths):
        s = disc.domain.perimeter * k / n_chords
        try:
            chord = tangent_chord(disc.domain, s, h)
        except ValueError as e:
            logger.warning(f"Cuerda {k} omitida: {e}")
            continue
        lhs, rhs = chord_identity(solution.u, chord)
        rows.append({"chord": k, "s": s, "h": h, "lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)})
    return pd.DataFrame(rows)


def cmd_verify(config: RunConfig) -> RunResult:
    """Resuelve (P) y ejecuta la batería de diagnósticos sobre el minimizador."""
    data = _prepare(config)
    diag = config.diagnostics
    disc = data.disc
    stability = check_stability_2d(data, diag.n_directions, diag.n_offsets, diag.stability_tol, config.system.n_jobs)
    solution = solve_problem_P(data, config.solver, stability=stability)

    report = ValidationReport()
    chords = _chord_rows(solution, config)
    chord_gap = float(chords["gap"].max()) if len(chords) else float("nan")
    report.add_check("chord_identity_gap", chord_gap, diag.chord_gap_factor * disc.h)

    h_values = [h for h in diag.h0 * np.array([1.0, 0.75, 0.5, 0.35, 0.25]) if 2.0 * h >= 4.0 * disc.h] or [diag.h0]
    functional = chord_functional(solution.u, solution.v, 0.0, h_values, diag.chord_bracket, data)
    report.add_check("chord_ratio_min", float(functional["ratio"].min()), diag.chord_bracket[0], upper=False)
    report.add_check("chord_ratio_max", float(functional["ratio"].max()), diag.chord_bracket[1])

    c_min, C_max = quadratic_separation(solution.u)
    report.add_check("separation_c_min", c_min, diag.separation_bounds[0], upper=False)
    report.add_check("separation_C_max", C_max, diag.separation_bounds[1])

    t, heights = boundary_profile(solution.u, 0.0, diag.h0)
    try:
        lemma = height_lemma_check(t, np.maximum(heights, 0.0), max(C_max, diag.separation_bounds[0]))
        report.add_check("height_lemma_C_fit", lemma.C_fit, lemma.C_lemma, severity="warning")
        lemma_C, lemma_applicable = lemma.C_fit, lemma.applicable
    except PreconditionError as e:
        logger.warning(f"⚠️ Lema de altura omitido: {e}")
        lemma_C, lemma_applicable = float("nan"), False

    el_table = euler_lagrange_test(solution, data, diag.n_el_tests, config.system.seed, config.solver)
    el_max = float(el_table["normalized"].max())
    report.add_check("el_test_max", el_max, diag.el_threshold)

    sections = interior_sections(solution.u, diag.section_height)
    report.add_check("sections_escaped", float((~sections["contained"]).sum()), 0.0, severity="warning")

    barriers = check_barriers(solution.v, data.rho)
    report.add_check("barrier_c_lower", barriers.c_lower, 0.0, upper=False)

    e1 = np.array([1.0, 0.0])
    base_offset = float(e1 @ disc.domain.centroid)
    crease_offset = base_offset + 0.5 * (disc.domain.support(e1) - base_offset)
    crease = crease_identity_check(solution.u, solution.v, solution.operator, data, e1, crease_offset)
    report.add_check("crease_identity_gap", crease["relative_gap"], 0.05, severity="warning")

    for result in report.results:
        logger.info(("✅ " if result.passed else "❌ ") + result.message)

    summary = {
        **_base_summary(config),
        "L_value": solution.L_value,
        "el_residual_sup": solution.el_sup,
        "mu_hat": stability.mu_hat,
        "converged": solution.converged,
        "chord_identity_max_gap": chord_gap,
        "separation_c_min": c_min,
        "separation_C_max": C_max,
        "height_lemma_C_fit": lemma_C,
        "height_lemma_applicable": lemma_applicable,
        "el_test_max": el_max,
        "barrier_c_lower": barriers.c_lower,
        "barrier_C_upper": barriers.C_upper,
        "crease_identity_gap": crease["relative_gap"],
        "checks_passed": report.summary["passed"],
        "checks_failed": report.summary["failed"],
        "verification": report.overall_status,
    }
    tables = {
        **_solution_tables(solution),
        "chords": chords,
        "chord_functional": functional,
        "el_test": el_table,
        "sections": sections,
        "barrier_shells": barriers.shells,
        "checks": report.to_frame(),
    }
    return summary, tables, bool(solution.converged and report.passed)


def cmd_compactness(config: RunConfig) -> RunResult:
    """Experimento de compacidad con datos perturbados de amplitud 1/k."""
    disc = build_discretization(config.domain, config.grid)
    comp = config.compactness
    sequence, limit = perturbation_sequence(config.data, disc, comp.k_values, comp.perturbation)
    table = compactness_experiment(sequence, limit, comp.k_values, config.solver, comp.deltas,
                                   config.system.n_jobs)
    column = f"sup_delta_{comp.deltas[0]:g}"
    distances = table[column].to_numpy()
    decreasing = bool(np.all(np.diff(distances) < 0))
    summary = {
        **_base_summary(config),
        "perturbation": comp.perturbation,
        "all_converged": bool(table["converged"].all()),
        "strictly_decreasing": decreasing,
        "last_distance": float(distances[-1]),
    }
    return summary, {"compactness": table}, bool(table["converged"].all() and decreasing)


def cmd_energy(config: RunConfig) -> RunResult:
    """Minimiza E(u) = ∫F(det D²u) + L(u) y verifica las cotas del determinante."""
    data = _prepare(config)
    F = load_F(config.energy)
    hypotheses = check_F_hypotheses(F)
    result = minimize_E(data, F, config.energy, config.solver)
    bounds = verify_det_bounds(result.u, F, f_out=result.f_out)

    disc = data.disc
    center = disc.domain.centroid
    amplitude = ALEXANDROV_FRACTION * float(np.sqrt(max(monotone_ma(result.u).min(), 0.0)))

    def bump(points: np.ndarray) -> np.ndarray:
        r2 = np.sum((points - center) ** 2, axis=1) / ALEXANDROV_RADIUS ** 2
        return amplitude * np.clip(1.0 - r2, 0.0, None) ** 2

    alexandrov = alexandrov_check(result.u, bump, config.diagnostics.alexandrov_bound, config.solver)
    linearization = linearization_check(result.u, lambda p: bump(p) / max(amplitude, 1e-300), opts=config.solver)

    u_interior, u_boundary = result.u.to_frames()
    summary = {
        **_base_summary(config),
        "t0": F.t0,
        "converged": result.converged,
        "fixed_point_gap": result.fixed_point_gap,
        "energy": result.energy,
        "clamp_active": result.clamp_active,
        "det_min": bounds.min_det,
        "det_max": bounds.max_det,
        "det_bounds_passed": bounds.passed,
        "F_hypotheses": hypotheses.overall_status,
        "alexandrov_ratio": alexandrov.ratio,
        "alexandrov_passed": alexandrov.passed,
    }
    tables = {
        "u": u_interior,
        "u_boundary": u_boundary,
        "det": pd.DataFrame({"node": np.arange(len(result.f_out)), "value": result.f_out}),
        "history": result.history,
        "F_hypotheses": hypotheses.to_frame(),
        "linearization": linearization,
    }
    return summary, tables, bool(result.converged and bounds.passed)


def cmd_pogorelov(config: RunConfig) -> RunResult:
    """Construye y verifica el minimizador singular en dimensión n ≥ 3."""
    pog = config.pogorelov
    outputs = run_pogorelov(pog, config.system.seed)
    system = outputs["system"]
    identity = outputs["identity"]
    residuals = system.max_residuals()
    summary = {
        "name": config.name,
        "seed": config.system.seed,
        "n": pog.n,
        "gamma": pog.gamma,
        "c": outputs["profile"].c,
        "a": outputs["profile"].a,
        "t_valid": outputs["profile"].t_valid,
        "ode_residual": outputs["profile"].ode_residual,
        "calibration_residual": outputs["profile"].calibration_residual,
        "det_residual_max": residuals["det"],
        "trace_residual_max": residuals["trace"],
        "sigma0": system.sigma0,
        "sigma0_spread": residuals["sigma_spread"],
        "identity_gap_max": float(identity["relative_gap"].iloc[1:].max()) if len(identity) > 1 else float("nan"),
        "identity_converged": bool(identity["converged"].all()),
    }
    tables = {
        "profile": outputs["profile"].to_frame(),
        "residuals": system.interior,
        "boundary": system.boundary,
        "identity": identity,
        "uniform_variant": outputs["uniform"],
    }
    return summary, tables, bool(identity["converged"].all())


COMMANDS: Dict[str, Callable[[RunConfig], RunResult]] = {
    "check-stability": cmd_check_stability,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "compactness": cmd_compactness,
    "pogorelov": cmd_pogorelov,
    "energy": cmd_energy,
}


def build_parser() -> argparse.ArgumentParser:
    """Construye el analizador de argumentos con un subcomando por tubería."""
    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=handler.__doc__.splitlines()[0])
        sub.add_argument("config", nargs="?", default=None, help="Archivo de configuración TOML")
        sub.add_argument("--log-level", default=None, help="Nivel de log en stderr")
        if name == "pogorelov":
            sub.add_argument("--n", type=int, default=None, help="Dimensión (≥ 3)")
            sub.add_argument("--gamma", type=float, default=None, help="Exponente γ ∈ (0, 2/n)")
            sub.add_argument("--tmax", type=float, default=None, help="Extremo de integración del perfil")
            sub.add_argument("--K", type=float, default=None, help="Constante de truncamiento de ψ")
            sub.add_argument("--delta", type=float, default=None, help="Parámetro de la variante uniformemente convexa")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Carga la configuración (con las sobrescrituras de entorno), aplica las
    opciones de línea de comandos y la publica como configuración global.

    Raises:
        ValueError: Si la configuración es inválida
        OSError: Si el archivo no se puede leer
    """
    config = get_runtime_config(args.config)
    override: Dict[str, Any] = {}
    if args.log_level:
        override["system"] = {"log_level": args.log_level.upper()}
    if args.command == "pogorelov":
        flags = {"n": args.n, "gamma": args.gamma, "t_max": args.tmax, "K": args.K, "delta": args.delta}
        pogorelov = {key: value for key, value in flags.items() if value is not None}
        if pogorelov:
            override["pogorelov"] = pogorelov
    if override:
        config = merge_configs(config, override)
    config.validate()
    return set_global_config(config)


def emit_summary(run_dir: Path, config: RunConfig, summary: Dict[str, Any],
                 tables: Dict[str, pd.DataFrame]) -> None:
    """Escribe configuración efectiva, tablas CSV y resumen en el directorio de la ejecución."""
    save_config_to_file(config, run_dir / EFFECTIVE_CONFIG)
    for name, frame in tables.items():
        write_csv(frame, run_dir / f"{name}.csv")
    write_summary(summary, run_dir / SUMMARY_FILE)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Ejecuta un subcomando y devuelve el código de salida.

    Args:
        argv: Argumentos (por defecto los del proceso)

    Returns:
        int: 0 si converge, 2 si termina sin converger, 1 ante error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR

    try:
        resolve_config(args)
        config = get_global_config()
        setup_logging(config.system.log_level)
        base = get_output_directory(config.system.output_dir)
        run_dir = create_run_directory(base, f"{args.command}-{config.name}")
        setup_logging(config.system.log_level, run_dir)
        logger.info(f"{APP_NAME} {args.command}: resultados en {run_dir}")

        summary, tables, converged = COMMANDS[args.command](config)
        summary["command"] = args.command
        emit_summary(run_dir, config, summary, tables)
    except (MongeFluxError, ValueError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_ERROR

    if converged:
        logger.info(f"✅ {args.command} completado")
        return EXIT_OK
    logger.warning(f"⚠️ {args.command} terminó sin converger")
    return EXIT_NOT_CONVERGED


def main() -> None:
    """Punto de entrada de la consola."""
    sys.exit(run())


if __name__ == "__main__":
    main()
