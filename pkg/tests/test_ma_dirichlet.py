"""Pruebas del esquema monótono y del resolvedor de Dirichlet."""

import numpy as np
import pytest

from core.ma_dirichlet import (
    GridFunction,
    boundary_field,
    frame_choice,
    hessian_cofactor,
    ma_residual,
    monotone_ma,
    nodal_field,
    solve_ma_dirichlet,
)
from geometry.domain_geometry import Discretization
from utils.config_utils import SolverConfig
from utils.validation_utils import DataValidationError, SolverDivergenceError

from conftest import square_norm


def tilted(points):
    """x² + xy + y²: det D²u = 3 con el mínimo en el marco diagonal."""
    return points[:, 0] ** 2 + points[:, 0] * points[:, 1] + points[:, 1] ** 2


def test_scheme_is_exact_on_paraboloid(half_paraboloid):
    np.testing.assert_allclose(monotone_ma(half_paraboloid), 1.0, atol=1e-8)


def test_scheme_picks_minimizing_frame(disc):
    u = GridFunction.from_function(disc, tilted, convex=True)
    np.testing.assert_allclose(monotone_ma(u), 3.0, atol=1e-7)
    assert np.all(frame_choice(u) == 1)


def test_hessian_and_cofactor(disc):
    u = GridFunction.from_function(disc, tilted)
    field = hessian_cofactor(u)
    np.testing.assert_allclose(field.hessian, np.broadcast_to([[2.0, 1.0], [1.0, 2.0]], field.hessian.shape),
                               atol=1e-7)
    np.testing.assert_allclose(field.cofactor[:, 0, 1], -1.0, atol=1e-7)
    np.testing.assert_allclose(field.determinant, 3.0, atol=1e-6)
    np.testing.assert_allclose(field.trace, 4.0, atol=1e-7)
    np.testing.assert_allclose(field.cofactor_eigenvalues(), np.tile([1.0, 3.0], (disc.n_nodes, 1)), atol=1e-6)


def test_dirichlet_solve_recovers_paraboloid(disc):
    u = solve_ma_dirichlet(disc, 4.0, 1.0)
    assert u.convex
    np.testing.assert_allclose(u.values, square_norm(disc.grid.points), atol=1e-6)
    sup, l1 = ma_residual(u, 4.0)
    assert sup <= SolverConfig().ma_tol
    assert l1 <= np.pi * sup + 1e-15


def test_dirichlet_solve_variable_data(disc):
    f = lambda p: 2.0 + 0.5 * p[:, 0]  # noqa: E731
    g = 0.2 * np.cos(disc.quad.theta)
    u = solve_ma_dirichlet(disc, f, g)
    assert u.convex
    np.testing.assert_array_equal(u.trace, g)
    assert ma_residual(u, f)[0] <= SolverConfig().ma_tol


def test_warm_start_keeps_solution(disc):
    first = solve_ma_dirichlet(disc, 4.0, 1.0)
    second = solve_ma_dirichlet(disc, 4.0, 1.0, initial=first)
    np.testing.assert_allclose(second.values, first.values, atol=1e-9)


def test_nonpositive_f_is_rejected(disc):
    f = np.full(disc.n_nodes, 1.0)
    f[5] = -0.5
    with pytest.raises(DataValidationError) as info:
        solve_ma_dirichlet(disc, f, 0.0)
    assert info.value.node == 5
    assert info.value.field_name == "f"


def test_divergence_reports_history(disc):
    opts = SolverConfig(ma_tol=1e-15, max_newton_iterations=1)
    f = lambda p: 2.0 + 0.5 * p[:, 0]  # noqa: E731
    with pytest.raises(SolverDivergenceError) as info:
        solve_ma_dirichlet(disc, f, 0.3 * np.sin(2.0 * disc.quad.theta), opts)
    assert len(info.value.history) == 2


def test_field_normalization(disc):
    np.testing.assert_array_equal(nodal_field(disc, 2.0), np.full(disc.n_nodes, 2.0))
    np.testing.assert_array_equal(boundary_field(disc, lambda p: p[:, 0]), disc.quad.points[:, 0])
    with pytest.raises(ValueError):
        nodal_field(disc, np.ones(3))
    with pytest.raises(ValueError):
        boundary_field(disc, np.ones(disc.m + 1))


def test_grid_function_shapes_are_checked(disc):
    with pytest.raises(ValueError, match="values"):
        GridFunction(disc, np.zeros(3), np.zeros(disc.m))
    with pytest.raises(ValueError, match="trace"):
        GridFunction(disc, np.zeros(disc.n_nodes), np.zeros(2))


def test_affine_shift_and_frames(half_paraboloid):
    shifted = half_paraboloid.add_affine([1.0, -2.0], 0.5)
    assert shifted.convex
    point = np.array([[0.2, 0.1]])
    assert shifted.evaluate(point)[0] == pytest.approx(0.5 * 0.05 + 0.5 + 0.2 - 0.2, abs=1e-8)
    interior, boundary = shifted.to_frames()
    assert list(interior.columns) == ["i", "j", "x", "y", "value"]
    assert list(boundary.columns) == ["s", "theta", "value"]
    assert len(boundary) == half_paraboloid.disc.m


@pytest.fixture(scope="module")
def disc32(disk):
    return Discretization.build(disk, 32, 64)


def random_boundary(theta, rng, amplitude=0.05):
    """Polinomio trigonométrico suave de grado 3."""
    k = np.arange(1, 4)[:, None]
    a, b = rng.uniform(-1.0, 1.0, size=(2, 3, 1))
    return amplitude * np.sum((a * np.cos(k * theta) + b * np.sin(k * theta)) / k ** 2, axis=0)


def random_density(rng):
    base = 1.0 + 0.5 * rng.uniform()
    slope = 0.3 * rng.uniform(-1.0, 1.0, size=2) / np.sqrt(2.0)
    return lambda p: base + p @ slope


@pytest.mark.parametrize("seed", range(50))
def test_solver_properties(disc32, seed):
    rng = np.random.default_rng(seed)
    theta = disc32.quad.theta
    f = random_density(rng)
    g1 = random_boundary(theta, rng)
    g2 = random_boundary(theta, rng)
    u1 = solve_ma_dirichlet(disc32, f, g1)
    assert u1.convex

    # Comparación: más determinante y menos borde dan una solución menor
    center = rng.uniform(-0.4, 0.4, size=2)
    height = rng.uniform(0.1, 1.0)
    bigger_f = lambda p: f(p) + height * np.exp(-np.sum((p - center) ** 2, axis=1) / 0.1)  # noqa: E731
    lower_g = g1 - 0.02 * (1.0 + np.sin(theta + rng.uniform(0.0, 2.0 * np.pi)))
    below = solve_ma_dirichlet(disc32, bigger_f, lower_g)
    assert np.all(below.values <= u1.values + 1e-6)

    # Concavidad en los datos de borde
    u2 = solve_ma_dirichlet(disc32, f, g2)
    middle = solve_ma_dirichlet(disc32, f, 0.5 * (g1 + g2))
    assert np.all(middle.values >= 0.5 * (u1.values + u2.values) - 1e-6)

    # Invariancia afín
    slope = rng.uniform(-1.0, 1.0, size=2)
    offset = rng.uniform(-1.0, 1.0)
    shifted = solve_ma_dirichlet(disc32, f, g1 + disc32.quad.points @ slope + offset)
    np.testing.assert_allclose(shifted.values, u1.values + disc32.grid.points @ slope + offset, atol=1e-6)


def test_grid_convergence_on_radial_data(disk):
    # f = 1 + |x|² tiene solución radial u = (2/3)(1 + |x|²/2)^{3/2}
    exact = lambda p: (2.0 / 3.0) * (1.0 + 0.5 * square_norm(p)) ** 1.5  # noqa: E731
    errors = {}
    for n in (16, 32, 64):
        disc = Discretization.build(disk, n, 64)
        flat = solve_ma_dirichlet(disc, 1.0, 0.0)
        np.testing.assert_allclose(flat.values, 0.5 * (square_norm(disc.grid.points) - 1.0), atol=1e-6)
        u = solve_ma_dirichlet(disc, lambda p: 1.0 + square_norm(p), exact)
        errors[n] = float(np.abs(u.values - exact(disc.grid.points)).max())
    assert max(errors.values()) < 2e-2
    assert errors[64] < errors[16]
