"""Pruebas de la construcción singular en dimensión 3."""

import numpy as np
import pytest

from analysis.pogorelov import (
    PogorelovProfile,
    build_fields,
    calibration_determinant,
    check_uniform_variant,
    closed_form_constant,
    first_integral_residual,
    integrate_profile,
    random_quadratics,
    run_pogorelov,
    sample_points,
    solve_profile_ode,
    stability_identity_check,
    truncate_domain,
    verify_system,
)
from utils.config_utils import PogorelovConfig


@pytest.fixture(scope="module")
def profile():
    return solve_profile_ode(3, 0.75)


@pytest.fixture(scope="module")
def fields(profile):
    return build_fields(profile, 0.5)


def test_constant_matches_closed_form(profile):
    assert closed_form_constant(3) == pytest.approx(9.0 / 16.0)
    assert profile.c == pytest.approx(9.0 / 16.0, rel=1e-6)
    assert profile.t_valid == pytest.approx(0.75)
    assert profile.ode_residual <= 1e-8
    assert profile.calibration_residual <= 1e-8


def test_first_integral_detects_wrong_constant():
    c = closed_form_constant(3)
    _, h, dh = integrate_profile(3, c, 0.7)
    assert first_integral_residual(3, c, h, dh) <= 1e-8
    assert first_integral_residual(3, 1.01 * c, h, dh) > 1e-3


def test_profile_stops_before_blowup():
    t, h, _ = integrate_profile(3, closed_form_constant(3), 1.0)
    assert 0.76 < t[-1] < 0.765
    assert np.all(np.isfinite(h))
    assert h[-1] > 10.0


def test_calibration_is_measured_not_assumed(profile):
    reference = np.array([[0.5, 0.5, 0.1]])
    assert calibration_determinant(profile, reference) == pytest.approx(1.0, abs=1e-8)
    t, h, dh = integrate_profile(3, 2.0 * profile.c, 0.5)
    doubled = PogorelovProfile(n=3, c=2.0 * profile.c, t=t, h=h, dh=dh, t_valid=0.5)
    assert calibration_determinant(doubled, reference) == pytest.approx(2.0, rel=1e-6)


def test_profile_is_even(profile):
    np.testing.assert_allclose(profile.h, profile.h[::-1])
    np.testing.assert_allclose(profile.dh, -profile.dh[::-1])
    assert profile.h.min() == pytest.approx(1.0)


def test_q_starts_at_gamma(fields):
    q, dq, _ = fields.profile.q_derivatives(np.array([0.0]))
    assert q[0] == pytest.approx(0.5)
    assert dq[0] == pytest.approx(0.0, abs=1e-12)
    q_a = fields.profile.q_derivatives(np.array([fields.a]))[0]
    assert q_a[0] == pytest.approx(0.0, abs=1e-10)
    assert 0.0 < fields.a < fields.profile.t_valid


def test_zero_moves_out_with_gamma(profile):
    assert build_fields(profile, 0.3).a < build_fields(profile, 0.5).a
    assert build_fields(profile, 0.4).a < build_fields(profile, 0.6).a


def test_lateral_scaling(fields):
    points = sample_points(fields, 20, seed=5)
    for lam in (0.5, 2.0, 3.7):
        stretched = points.copy()
        stretched[:, :-1] *= lam
        np.testing.assert_allclose(fields.u(stretched), lam ** (4.0 / 3.0) * fields.u(points), rtol=1e-12)


def test_v_is_rescaling_difference(fields):
    points = sample_points(fields, 20, seed=9)
    eps = 1e-5
    moved = points.copy()
    moved[:, -1] *= 1.0 + eps
    rescaled = (1.0 + eps) ** (-fields.gamma) * fields.u(moved)
    quotient = (fields.u(points) - rescaled) / eps
    np.testing.assert_allclose(quotient, fields.v(points), atol=1e-4)


@pytest.mark.parametrize("gamma", [0.0, 0.7, -0.1])
def test_gamma_out_of_range(profile, gamma):
    with pytest.raises(ValueError, match="gamma"):
        build_fields(profile, gamma)


def test_low_dimension_rejected():
    with pytest.raises(ValueError, match="n debe"):
        solve_profile_ode(2, 0.5)


def test_system_residuals(fields):
    report = verify_system(fields, sample_points(fields, 50, seed=7))
    residuals = report.max_residuals()
    assert residuals["det"] < 1e-5
    assert residuals["trace"] < 1e-4
    assert residuals["boundary_v"] < 1e-8
    assert residuals["sigma_spread"] < 1e-4
    assert report.sigma0 == pytest.approx(fields.profile.sigma0, rel=1e-3)
    assert report.sigma0 > 0


def test_sample_points_avoid_axis(fields):
    points = sample_points(fields, 30, seed=1)
    r = np.linalg.norm(points[:, :-1], axis=1)
    assert points.shape == (30, 3)
    assert r.min() >= 0.5 and r.max() <= 2.0
    assert np.abs(points[:, -1]).max() <= 0.9 * fields.a


def test_truncated_domain(fields):
    domain = truncate_domain(fields, 10.0)
    R0 = domain.radius(0.0)
    assert R0 > 1.0
    assert domain.radius(fields.a) == pytest.approx(1.0, abs=1e-3)
    inside = np.array([[0.5 * R0, 0.0, 0.0]])
    outside = np.array([[1.1 * R0, 0.0, 0.0]])
    assert domain.contains(inside)[0]
    assert not domain.contains(outside)[0]
    with pytest.raises(ValueError, match="no acotado"):
        truncate_domain(fields, 1e-3)


def test_stability_identity(fields):
    domain = truncate_domain(fields, 10.0)
    forms = random_quadratics(3, 10, seed=3)
    table = stability_identity_check(domain, forms)
    quadratic = table.iloc[1:]
    assert (quadratic["relative_gap"] < 1e-3).all()
    scale = quadratic["rhs"].abs().max()
    assert table.iloc[0]["gap"] < 1e-2 * scale
    assert table.iloc[0]["rhs"] == pytest.approx(0.0, abs=1e-12)


def test_random_quadratics_shapes():
    forms = random_quadratics(3, 5, seed=0)
    assert len(forms) == 5
    np.testing.assert_array_equal(forms[0][0], np.zeros((3, 3)))
    np.testing.assert_array_equal(forms[1][0], np.eye(3))
    for Q, b, _ in forms[2:]:
        assert np.linalg.eigvalsh(Q).min() > 0
        assert b.shape == (3,)


def test_uniform_variant(fields):
    table = check_uniform_variant(fields, 0.1)
    assert (table["v_at_zero"] < 1e-8).all()
    assert (table["min_inside"] > 0).all()
    assert table["t_zero"].is_monotonic_decreasing


def test_run_pogorelov_keys():
    config = PogorelovConfig(n_samples=5, n_quadratics=3)
    result = run_pogorelov(config, seed=11)
    assert set(result) == {"profile", "fields", "system", "domain", "identity", "uniform"}
    assert result["profile"].gamma == pytest.approx(0.5)
    assert len(result["identity"]) == 3
