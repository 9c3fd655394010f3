"""Pruebas de la geometría del dominio, la malla y las cuadraturas."""

import numpy as np
import pytest

from geometry.domain_geometry import (
    Discretization,
    boundary_quadrature,
    build_discretization,
    build_grid,
    make_disk,
    make_sampled_domain,
)
from geometry.interpolation import (
    periodic_derivative,
    periodic_smooth3,
    trigonometric_interpolation_matrix,
)
from utils.config_utils import DomainConfig, GridConfig


def circle_samples(count, radius=1.0):
    theta = 2.0 * np.pi * np.arange(count) / count
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def test_disk_basic_quantities(disk):
    assert disk.perimeter == pytest.approx(2.0 * np.pi)
    assert disk.area == pytest.approx(np.pi)
    assert disk.diameter == 2.0
    assert disk.rho_geom == (1.0, 1.0)
    np.testing.assert_allclose(disk.distance(np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])), [1.0, 0.5, -1.0])
    assert disk.support((3.0, 4.0)) == pytest.approx(1.0)


def test_disk_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        make_disk(0.0)


def test_disk_normal_is_outward(disk):
    s = np.linspace(0.0, disk.perimeter, 7, endpoint=False)
    np.testing.assert_allclose(disk.boundary_normal(s), disk.boundary_point(s), atol=1e-14)


def test_disk_chord_endpoints_lie_on_line(disk):
    e = np.array([np.cos(0.3), np.sin(0.3)])
    offsets = np.array([-0.5, 0.0, 0.6])
    X1, X2, s1, s2 = disk.chord_endpoints(e, offsets)
    np.testing.assert_allclose(X1 @ e, offsets, atol=1e-12)
    np.testing.assert_allclose(X2 @ e, offsets, atol=1e-12)
    tau = np.array([-e[1], e[0]])
    assert np.all((X2 - X1) @ tau > 0)
    np.testing.assert_allclose(disk.boundary_point(s1), X1, atol=1e-12)
    np.testing.assert_allclose(disk.boundary_point(s2), X2, atol=1e-12)


def test_chord_outside_domain_is_nan(disk):
    X1, _, _, _ = disk.chord_endpoints((1.0, 0.0), np.array([1.5]))
    assert np.all(np.isnan(X1))


def test_boundary_quadrature_integrates_trigonometric_polynomials(disk):
    quad = boundary_quadrature(disk, 32)
    assert quad.m == 32
    assert quad.integrate(np.ones(32)) == pytest.approx(2.0 * np.pi)
    assert quad.integrate(quad.points[:, 0] ** 2) == pytest.approx(np.pi)
    assert quad.integrate(quad.points[:, 0]) == pytest.approx(0.0, abs=1e-13)


@pytest.mark.parametrize("m", [3, 2, 31])
def test_boundary_quadrature_rejects_bad_m(disk, m):
    with pytest.raises(ValueError):
        boundary_quadrature(disk, m)


def test_area_rule_is_exact_for_polynomials(disc):
    points, weights = disc.area_rule
    assert weights.sum() == pytest.approx(np.pi, rel=1e-12)
    assert weights @ np.sum(points ** 2, axis=1) == pytest.approx(np.pi / 2.0, rel=1e-12)
    np.testing.assert_allclose(weights @ points, [0.0, 0.0], atol=1e-13)


def test_grid_nodes_are_interior(disk):
    grid = build_grid(disk, 16)
    assert grid.spacing == pytest.approx(2.0 / 16)
    assert np.all(disk.distance(grid.points) > 0)
    assert grid.weights.sum() == pytest.approx(np.pi)
    assert grid.n_lines == 4
    assert 0.0 < grid.min_fraction <= 1.0


def test_wide_stencil_above_threshold(disk):
    assert build_grid(disk, 40).n_lines == 8


def test_grid_rejects_coarse_resolution(disk):
    with pytest.raises(ValueError):
        build_grid(disk, 4)


def test_line_index_accepts_both_senses(disc):
    assert disc.grid.line_index((1, 1)) == disc.grid.line_index((-1, -1))
    with pytest.raises(KeyError):
        disc.grid.line_index((3, 1))


def test_second_differences_exact_for_quadratics(disc):
    """D_e u = e·D²u·e para u = x² + 3xy − y² (traza exacta en el disco)."""
    def u(p):
        return p[:, 0] ** 2 + 3.0 * p[:, 0] * p[:, 1] - p[:, 1] ** 2

    hessian = np.array([[2.0, 3.0], [3.0, -2.0]])
    values, trace = u(disc.grid.points), u(disc.quad.points)
    for op in disc.second_differences:
        expected = op.unit @ hessian @ op.unit
        np.testing.assert_allclose(op.apply(values, trace), expected, atol=1e-8)


def test_local_interpolator_reproduces_quadratics(disc):
    def u(p):
        return 1.0 + p[:, 0] - 2.0 * p[:, 1] + p[:, 0] * p[:, 1] + 0.5 * p[:, 1] ** 2

    nodal = np.concatenate([u(disc.grid.points), u(disc.quad.points)])
    queries = np.array([[0.1, 0.2], [-0.55, 0.31], [0.0, -0.9]])
    np.testing.assert_allclose(disc.interpolator.evaluate(queries, nodal), u(queries), atol=1e-7)
    gradient = np.column_stack([1.0 + queries[:, 1], -2.0 + queries[:, 0] + queries[:, 1]])
    np.testing.assert_allclose(disc.interpolator.gradient(queries, nodal), gradient, atol=1e-6)


def test_trace_interpolation_is_exact_for_low_modes(disc):
    trace = np.cos(2.0 * disc.quad.theta) + 0.5 * np.sin(disc.quad.theta)
    s = np.array([0.1, 1.7, 4.0])
    theta = disc.domain.angle_of(s)
    np.testing.assert_allclose(disc.trace_at(s, trace), np.cos(2.0 * theta) + 0.5 * np.sin(theta), atol=1e-12)


def test_trigonometric_matrix_is_identity_on_nodes():
    theta = 2.0 * np.pi * np.arange(8) / 8
    np.testing.assert_allclose(trigonometric_interpolation_matrix(theta, 8), np.eye(8), atol=1e-14)
    with pytest.raises(ValueError):
        trigonometric_interpolation_matrix(theta, 7)


def test_periodic_derivative_of_cosine():
    theta = 2.0 * np.pi * np.arange(32) / 32
    period = 2.0 * np.pi
    np.testing.assert_allclose(periodic_derivative(np.cos(3 * theta), period), -3 * np.sin(3 * theta), atol=1e-12)
    np.testing.assert_allclose(periodic_derivative(np.cos(3 * theta), period, order=2), -9 * np.cos(3 * theta),
                               atol=1e-11)


def test_smoothing_preserves_constants():
    np.testing.assert_allclose(periodic_smooth3(np.full(10, 2.5)), 2.5)


def test_sampled_circle_matches_disk():
    domain = make_sampled_domain(circle_samples(64))
    assert domain.perimeter == pytest.approx(2.0 * np.pi, rel=1e-4)
    assert domain.area == pytest.approx(np.pi, rel=1e-3)
    np.testing.assert_allclose(domain.centroid, [0.0, 0.0], atol=1e-6)
    lo, hi = domain.rho_geom
    assert lo == pytest.approx(1.0, rel=5e-2)
    assert hi == pytest.approx(1.0, rel=5e-2)
    assert domain.support((0.0, 1.0)) == pytest.approx(1.0, rel=1e-4)


def test_sampled_orientation_is_normalized():
    domain = make_sampled_domain(circle_samples(32)[::-1])
    assert domain.area > 0
    s = np.array([0.0])
    point = domain.boundary_point(s)[0]
    assert point @ domain.boundary_normal(s)[0] > 0.99


def test_sampled_domain_rejects_nonconvex_boundary():
    theta = 2.0 * np.pi * np.arange(64) / 64
    radius = 1.0 + 0.4 * np.cos(5 * theta)
    with pytest.raises(ValueError, match="convexo"):
        make_sampled_domain(radius[:, None] * np.column_stack([np.cos(theta), np.sin(theta)]))


def test_sampled_domain_needs_enough_samples():
    with pytest.raises(ValueError):
        make_sampled_domain(circle_samples(5))


def test_build_discretization_from_config():
    disc = build_discretization(DomainConfig(radius=2.0, center=[1.0, 0.0]), GridConfig(n=16, m=32))
    assert isinstance(disc, Discretization)
    assert disc.h == pytest.approx(4.0 / 16)
    assert disc.m == 32
    np.testing.assert_allclose(disc.domain.centroid, [1.0, 0.0])
