"""Pruebas de la energía E, de F y de las comprobaciones asociadas."""

import numpy as np
import pandas as pd
import pytest

from core.energy_min import (
    EnergyProfileF,
    alexandrov_check,
    check_F_hypotheses,
    default_F,
    linearization_check,
    load_F,
    minimize_E,
    tabulated_F,
    verify_det_bounds,
)
from core.minimizer import solve_problem_P
from core.problem_data import ConstantDensity, check_stability_2d
from utils.config_utils import EnergyConfig, SolverConfig
from utils.validation_utils import PreconditionError


def centered_bump(width, amplitude):
    def evaluate(points):
        r2 = np.sum(np.atleast_2d(points) ** 2, axis=1) / width ** 2
        return amplitude * np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
    return evaluate


def test_default_F_satisfies_hypotheses():
    F = default_F(10.0)
    assert F.hypotheses.passed
    assert F.t1_floor == pytest.approx(0.1)
    assert F.F(np.array([10.0, 20.0])) == pytest.approx([0.0, 0.0])
    assert F.dF(np.array([10.0]))[0] == pytest.approx(0.0, abs=1e-15)
    t = np.array([0.5, 2.0, 7.0])
    np.testing.assert_allclose(F.inverse_dF(F.dF(t)), t, rtol=1e-12)
    np.testing.assert_allclose(F.inverse_dF(np.array([0.3])), 10.0)


def test_bad_F_is_rejected(canonical_data):
    F = EnergyProfileF(1.0, lambda t: (t - 1.0) ** 2, lambda t: 2.0 * (t - 1.0), lambda y: 1.0 + 0.5 * y)
    report = check_F_hypotheses(F)
    assert not report.passed
    assert "F_beyond_t0" in [r.name for r in report.get_failed_results()]
    with pytest.raises(PreconditionError, match="hipótesis"):
        minimize_E(canonical_data, F)


def test_tabulated_F_matches_default(tmp_path):
    reference = default_F(4.0)
    t = np.linspace(0.05, 4.0, 200)
    path = tmp_path / "F.csv"
    pd.DataFrame({"t": t, "F": reference.F(t), "dF": reference.dF(t)}).to_csv(path, index=False)
    F = tabulated_F(path, 4.0)
    assert F.kind == "tabulated"
    samples = np.array([0.3, 1.1, 3.3])
    np.testing.assert_allclose(F.F(samples), reference.F(samples), rtol=1e-4)
    np.testing.assert_allclose(F.inverse_dF(reference.dF(samples)), samples, rtol=1e-3)
    assert F.F(np.array([5.0]))[0] == 0.0

    loaded = load_F(EnergyConfig(t0=4.0, table_path=str(path)))
    assert loaded.kind == "tabulated"
    assert load_F(EnergyConfig(t0=4.0)).kind == "default"


def test_tabulated_F_errors(tmp_path):
    with pytest.raises(ValueError, match="no encontrado"):
        tabulated_F(tmp_path / "none.csv", 1.0)
    path = tmp_path / "bad.csv"
    pd.DataFrame({"t": [0.1, 1.0], "F": [1.0, 0.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError, match="dF"):
        tabulated_F(path, 1.0)


def test_det_bounds(paraboloid):
    report = verify_det_bounds(paraboloid, default_F(10.0))
    assert report.passed
    assert report.min_det == pytest.approx(4.0, abs=1e-6)
    assert not report.clamp_active
    assert not verify_det_bounds(paraboloid, default_F(3.0)).passed


def test_zero_A_is_degenerate(canonical_data):
    F = default_F(5.0)
    result = minimize_E(canonical_data.with_A(ConstantDensity(0.0)), F)
    assert result.converged
    np.testing.assert_array_equal(result.f_out, 5.0)
    np.testing.assert_array_equal(result.v.values, 0.0)
    assert np.isfinite(result.energy)
    assert result.history["energy"].iloc[0] == result.energy


def test_minimize_energy_canonical(canonical_data):
    F = default_F(10.0)
    stability = check_stability_2d(canonical_data, 16, 16)
    solver = SolverConfig(tol_el=1e-2)
    opts = EnergyConfig(t0=10.0, tol=1e-2, max_iterations=25)
    result = minimize_E(canonical_data, F, opts, solver, stability)
    gaps = result.history["fixed_point_gap"].to_numpy()
    assert gaps[-1] < gaps[0]
    assert np.all(result.f_out >= F.t1_floor)
    assert np.all(result.f_out <= F.t0)
    bounds = verify_det_bounds(result.u, F, f_out=result.f_out)
    assert bounds.passed
    assert np.isfinite(result.energy)
    assert result.energy == pytest.approx(result.history["energy"].iloc[-1])

    again = solve_problem_P(canonical_data.with_f(result.f_out), solver, initial_g=result.solution.g,
                            stability=stability)
    gap = float(np.abs(again.v.values + F.dF(result.f_out)).max())
    assert gap <= 2.0 * max(result.fixed_point_gap, opts.tol)


def test_energy_never_increases(canonical_data):
    F = default_F(10.0)
    stability = check_stability_2d(canonical_data, 16, 16)
    opts = EnergyConfig(t0=10.0, tol=1e-4, max_iterations=12)
    result = minimize_E(canonical_data, F, opts, SolverConfig(tol_el=1e-2), stability)
    energies = result.history["energy"].to_numpy()
    assert len(energies) >= 2
    assert np.all(np.diff(energies) <= 0.0)
    assert energies[-1] < energies[0]
    assert (result.history["backtracks"] >= 0).all()


def test_alexandrov_bound_on_paraboloid(paraboloid):
    report = alexandrov_check(paraboloid, centered_bump(0.5, 0.2))
    assert not report.degenerate
    assert 0.3 < report.ratio <= 0.6
    assert report.passed


def test_alexandrov_degenerate_and_infeasible(paraboloid):
    assert alexandrov_check(paraboloid, 0.0).degenerate
    with pytest.raises(PreconditionError):
        alexandrov_check(paraboloid, 3.0)


def test_linearization_gap_scales_linearly(half_paraboloid):
    bump = centered_bump(0.5, 1.0)

    def h(points):
        points = np.atleast_2d(points)
        return np.cos(np.pi * points[:, 0]) * bump(points)

    table = linearization_check(half_paraboloid, h, (0.04, 0.02, 0.01))
    assert list(table.columns) == ["eps", "gap", "gap_over_eps", "one_sided_min", "fitted_C",
                                   "det_phi_integral", "convex"]
    gaps = table["gap"].to_numpy()
    assert 1.6 <= gaps[0] / gaps[1] <= 2.4
    assert 1.6 <= gaps[1] / gaps[2] <= 2.4
    assert table["convex"].all()


def test_linearization_with_zero_h(half_paraboloid):
    table = linearization_check(half_paraboloid, 0.0, (0.02,))
    assert table["gap"].iloc[0] == 0.0
