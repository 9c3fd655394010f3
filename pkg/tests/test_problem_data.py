"""Pruebas de la carga de datos, el equilibrio y el criterio de estabilidad."""

import numpy as np
import pandas as pd
import pytest

from core.ma_dirichlet import GridFunction
from core.problem_data import (
    BumpDensity,
    ConstantDensity,
    auto_balance,
    check_mass_balance,
    check_stability_2d,
    crease_integrals,
    is_balanced,
    load_problem,
    normalize,
    require_stable,
)
from utils.config_utils import DataConfig
from utils.validation_utils import DataValidationError, PreconditionError

from conftest import square_norm

TWO_BUMPS = {
    "kind": "bumps",
    "bumps": [
        {"center": [0.9, 0.0], "width": 0.08, "mass": np.pi},
        {"center": [-0.9, 0.0], "width": 0.08, "mass": np.pi},
    ],
}


@pytest.fixture(scope="module")
def two_bump_data(disc):
    return load_problem(DataConfig(A=TWO_BUMPS, auto_balance=True), disc)


def test_canonical_data_is_balanced(canonical_data):
    assert canonical_data.rho == pytest.approx(0.25)
    mass_gap, center_gap = check_mass_balance(canonical_data)
    assert mass_gap == pytest.approx(0.0, abs=1e-10)
    np.testing.assert_allclose(center_gap, 0.0, atol=1e-10)
    assert is_balanced(canonical_data)


def test_bump_density_has_prescribed_mass(disc):
    bump = BumpDensity([{"center": [0.0, 0.0], "width": 0.5, "mass": 2.0}])
    points, weights = disc.area_rule
    assert weights @ bump(points) == pytest.approx(2.0, rel=1e-3)
    assert bump(np.array([[0.6, 0.0]]))[0] == 0.0
    with pytest.raises(ValueError):
        BumpDensity([{"center": [0.0, 0.0], "width": 0.0, "mass": 1.0}])


def test_uniform_disk_stability_constant(canonical_data):
    report = check_stability_2d(canonical_data, n_directions=16, n_offsets=16)
    assert report.balanced
    assert report.stable
    assert report.mu_hat == pytest.approx(1.0 / 3.0, abs=1e-4)
    summary = report.to_summary()
    assert summary["status"] == "stable"
    assert summary["worst_offset"] == pytest.approx(0.0, abs=1e-12)


def test_crease_integrals_on_uniform_disk(canonical_data):
    boundary, area = crease_integrals(canonical_data, (1.0, 0.0), np.array([0.0, 0.5]))
    assert boundary[0] == pytest.approx(2.0, rel=1e-8)
    assert area[0] == pytest.approx(4.0 / 3.0, rel=1e-6)
    assert boundary[1] == pytest.approx(2.0 * (np.sqrt(3.0) / 2.0 - np.pi / 6.0), rel=1e-8)
    assert area[1] == pytest.approx(2.0 * (3.0 * np.sqrt(3.0) / 8.0 - np.pi / 6.0), rel=1e-5)


def test_two_bumps_are_unstable(two_bump_data):
    assert is_balanced(two_bump_data)
    assert two_bump_data.correction["scale"] == pytest.approx(1.0, rel=0.1)
    report = check_stability_2d(two_bump_data, n_directions=16, n_offsets=32)
    assert report.balanced
    assert not report.stable
    assert report.mu_hat < 0
    direction, _ = report.worst_crease
    assert abs(direction[0]) == pytest.approx(1.0, abs=1e-12)

    row = report.values[(report.values["angle"] == 0.0) & np.isclose(report.values["offset"], 0.5)]
    assert len(row) == 1
    assert row["boundary_integral"].iloc[0] == pytest.approx(0.68485, abs=1e-4)
    scale = two_bump_data.correction["scale"]
    assert row["area_integral"].iloc[0] == pytest.approx(0.4 * np.pi * scale, rel=2e-2)
    assert row["L_plus"].iloc[0] < 0


def test_require_stable_rejects_two_bumps(two_bump_data):
    with pytest.raises(PreconditionError, match="estables"):
        require_stable(two_bump_data, 16, 32)


def test_unbalanced_data_is_reported(canonical_data):
    data = canonical_data.with_A(ConstantDensity(3.0))
    report = check_stability_2d(data, 8, 8)
    assert not report.balanced
    assert report.mu_hat is None
    assert not report.stable
    assert report.mass_gap == pytest.approx(np.pi, rel=1e-8)
    with pytest.raises(PreconditionError, match="equilibrados"):
        require_stable(data, 8, 8)


def test_auto_balance_fixes_affine_defect(canonical_data):
    data = auto_balance(canonical_data.with_A(lambda p: 1.0 + 0.3 * np.atleast_2d(p)[:, 0]))
    assert is_balanced(data)
    assert data.correction["scale"] == pytest.approx(2.0, rel=1e-10)
    points = data.disc.grid.points
    np.testing.assert_allclose(data.A(points), 2.0, atol=1e-8)


def test_auto_balance_refuses_negative_density(canonical_data):
    bump = BumpDensity([{"center": [0.5, 0.0], "width": 0.3, "mass": 2.0 * np.pi}])
    with pytest.raises(DataValidationError, match="negativa"):
        auto_balance(canonical_data.with_A(bump))


def test_scaling_preserves_balance(canonical_data):
    scaled = canonical_data.scaled(3.0)
    np.testing.assert_allclose(scaled.sigma, 3.0)
    np.testing.assert_allclose(scaled.A_nodes, 6.0)
    assert is_balanced(scaled)
    with pytest.raises(ValueError):
        canonical_data.scaled(0.0)


def test_load_problem_families(disc, tmp_path):
    path = tmp_path / "A.csv"
    pd.DataFrame({"node": np.arange(disc.n_nodes), "value": np.full(disc.n_nodes, 2.0)}).to_csv(path, index=False)
    config = DataConfig(
        f={"kind": "affine", "value": 3.0, "gradient": [0.5, 0.0]},
        sigma={"kind": "fourier", "constant": 1.0, "cos": [0.2]},
        A={"kind": "csv", "path": str(path)},
        rho=0.1,
    )
    data = load_problem(config, disc)
    np.testing.assert_allclose(data.f, 3.0 + 0.5 * disc.grid.points[:, 0])
    np.testing.assert_allclose(data.sigma, 1.0 + 0.2 * np.cos(disc.quad.theta))
    np.testing.assert_allclose(data.A(np.array([[0.1, -0.2]])), 2.0, atol=1e-8)
    assert data.rho == 0.1


def test_load_problem_rejects_bad_data(disc, tmp_path):
    with pytest.raises(DataValidationError) as info:
        load_problem(DataConfig(f={"kind": "affine", "value": -1.0}), disc)
    assert info.value.field_name == "f"

    with pytest.raises(DataValidationError, match="sigma"):
        load_problem(DataConfig(sigma={"kind": "constant", "value": 0.0}), disc)

    with pytest.raises(DataValidationError):
        load_problem(DataConfig(f={"kind": "constant", "value": 50.0}, rho=0.5), disc)

    short = tmp_path / "short.csv"
    pd.DataFrame({"node": [0, 1], "value": [1.0, 1.0]}).to_csv(short, index=False)
    with pytest.raises(DataValidationError):
        load_problem(DataConfig(A={"kind": "csv", "path": str(short)}), disc)


def test_normalize_removes_affine_part(paraboloid):
    shifted = paraboloid.add_affine([1.0, -2.0], 3.0)
    normalized = normalize(shifted)
    np.testing.assert_allclose(normalized.values, square_norm(paraboloid.disc.grid.points), atol=1e-7)
    assert normalized.convex


def test_normalize_rejects_nonconvex(disc):
    concave = GridFunction.from_function(disc, lambda p: -square_norm(p), name="w")
    with pytest.raises(PreconditionError, match="convexa"):
        normalize(concave)
