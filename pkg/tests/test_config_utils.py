"""Pruebas de la capa de configuración."""

import pytest

from utils.config_utils import (
    DataConfig,
    DomainConfig,
    GridConfig,
    PogorelovConfig,
    RunConfig,
    SolverConfig,
    get_default_config,
    load_config_from_file,
    merge_configs,
    save_config_to_file,
    set_global_config,
    get_global_config,
)


def test_defaults_describe_canonical_case():
    config = get_default_config()
    assert config.domain.kind == "disk"
    assert config.domain.radius == 1.0
    assert config.data.f == {"kind": "constant", "value": 4.0}
    assert config.data.sigma["value"] == 1.0
    assert config.data.A["value"] == 2.0
    assert config.diagnostics.alexandrov_bound == 0.75
    assert config.diagnostics.chord_bracket == [0.05, 20.0]
    assert config.pogorelov.n == 3
    assert config.pogorelov.gamma == 0.5


@pytest.mark.parametrize("factory, kwargs", [
    (DomainConfig, {"kind": "ellipse"}),
    (DomainConfig, {"radius": 0.0}),
    (GridConfig, {"n": 4}),
    (GridConfig, {"m": 63}),
    (DataConfig, {"f": {"kind": "bumps"}}),
    (DataConfig, {"A": {"kind": "csv"}}),
    (DataConfig, {"rho": 1.5}),
    (SolverConfig, {"armijo": 0.7}),
    (SolverConfig, {"min_step": 2.0}),
    (PogorelovConfig, {"n": 2}),
    (PogorelovConfig, {"gamma": 0.7}),
])
def test_invalid_sections_are_rejected(factory, kwargs):
    with pytest.raises(ValueError):
        factory(**kwargs)


def test_dict_round_trip_preserves_sections():
    config = get_default_config()
    config.grid.n = 48
    config.data.auto_balance = True
    restored = RunConfig.from_dict(config.to_dict())
    assert restored.grid.n == 48
    assert restored.data.auto_balance is True
    assert restored.data.rho is None


def test_unknown_section_is_rejected():
    with pytest.raises(ValueError, match="desconocidas"):
        RunConfig.from_dict({"plotting": {}})


def test_unknown_key_is_rejected():
    with pytest.raises(ValueError, match="grid"):
        RunConfig.from_dict({"grid": {"resolution": 10}})


def test_merge_replaces_family_when_kind_changes():
    config = get_default_config()
    merged = merge_configs(config, {"data": {"A": {"kind": "bumps", "bumps": [], "background": 1.0}}})
    assert merged.data.A == {"kind": "bumps", "bumps": [], "background": 1.0}
    assert merged.data.f == config.data.f


def test_merge_updates_nested_values():
    merged = merge_configs(get_default_config(), {"pogorelov": {"gamma": 0.4}, "grid": {"n": 16}})
    assert merged.pogorelov.gamma == 0.4
    assert merged.pogorelov.n == 3
    assert merged.grid.n == 16


def test_save_and_load_toml(tmp_path):
    config = get_default_config()
    config.name = "prueba"
    config.solver.tol_el = 5e-3
    path = save_config_to_file(config, tmp_path / "cfg" / "run.toml")
    loaded = load_config_from_file(path)
    assert loaded.name == "prueba"
    assert loaded.solver.tol_el == pytest.approx(5e-3)
    assert loaded.to_dict() == config.to_dict()


def test_partial_file_merges_with_defaults(tmp_path):
    path = tmp_path / "partial.toml"
    path.write_text('[grid]\nn = 40\n\n[data.f]\nkind = "constant"\nvalue = 2.0\n', encoding="utf-8")
    config = load_config_from_file(path)
    assert config.name == "partial"
    assert config.grid.n == 40
    assert config.grid.m == 128
    assert config.data.f["value"] == 2.0


def test_csv_paths_resolve_relative_to_config(tmp_path):
    path = tmp_path / "tab.toml"
    path.write_text('[data.A]\nkind = "csv"\npath = "a.csv"\n', encoding="utf-8")
    config = load_config_from_file(path)
    assert config.data.A["path"] == str((tmp_path / "a.csv").resolve())


def test_missing_file_raises(tmp_path):
    with pytest.raises(ValueError, match="no encontrado"):
        load_config_from_file(tmp_path / "nada.toml")


def test_malformed_toml_raises(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[grid\nn = ", encoding="utf-8")
    with pytest.raises(ValueError, match="TOML"):
        load_config_from_file(path)


def test_global_config_can_be_replaced():
    config = get_default_config()
    config.name = "global"
    assert set_global_config(config) is config
    assert get_global_config().name == "global"
