"""Pruebas de extremo a extremo de la línea de comandos."""

from pathlib import Path

import pandas as pd
import pytest

from app import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, run
from utils.config_utils import load_config_from_file

TINY_CANONICAL = """
[grid]
n = 16
m = 32

[diagnostics]
n_directions = 8
n_offsets = 8
"""

TINY_UNSTABLE = """
[grid]
n = 16
m = 32

[diagnostics]
n_directions = 16
n_offsets = 32

[data]
f = { kind = "constant", value = 4.0 }
sigma = { kind = "constant", value = 1.0 }
auto_balance = true

[data.A]
kind = "bumps"
background = 0.0
bumps = [
    { center = [0.9, 0.0], width = 0.08, mass = 3.141592653589793 },
    { center = [-0.9, 0.0], width = 0.08, mass = 3.141592653589793 },
]
"""

TINY_VERIFY = TINY_CANONICAL + """n_el_tests = 4
n_chords = 6
"""

TINY_COMPACTNESS = """
[grid]
n = 16
m = 32

[compactness]
k_values = [1, 2, 4]
deltas = [0.2]
"""

TINY_ENERGY = """
[grid]
n = 16
m = 32

[energy]
t0 = 10.0
tol = 1e-2
max_iterations = 6

[solver]
tol_el = 1e-2
"""

TINY_POGORELOV = """
[pogorelov]
n_samples = 5
n_quadratics = 3
"""


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    target = tmp_path / "runs"
    monkeypatch.setenv("MONGEFLUX_OUTPUT_DIR", str(target))
    return target


def _write(tmp_path: Path, name: str, content: str) -> str:
    path = tmp_path / f"{name}.toml"
    path.write_text(content, encoding="utf-8")
    return str(path)


def _summary(run_dir: Path) -> dict:
    lines = (run_dir / "summary.txt").read_text(encoding="utf-8").splitlines()
    return dict(line.split("=", 1) for line in lines)


def test_check_stability_writes_outputs(tmp_path, output_dir):
    config = _write(tmp_path, "tiny", TINY_CANONICAL)
    assert run(["check-stability", config]) == EXIT_OK

    run_dir = output_dir / "check-stability-tiny"
    for name in ("effective_config.toml", "creases.csv", "summary.txt", "run.log"):
        assert (run_dir / name).exists(), name
    summary = _summary(run_dir)
    assert summary["stable"] == "true"
    assert summary["command"] == "check-stability"
    assert list(summary) == sorted(summary)

    effective = load_config_from_file(run_dir / "effective_config.toml")
    assert effective.grid.n == 16
    assert effective.diagnostics.n_directions == 8


def test_unstable_data_reported_without_failure(tmp_path, output_dir):
    config = _write(tmp_path, "bumps", TINY_UNSTABLE)
    assert run(["check-stability", config]) == EXIT_OK
    summary = _summary(output_dir / "check-stability-bumps")
    assert summary["stable"] == "false"
    assert float(summary["mu_hat"]) < 0


def test_solve_unstable_data_fails(tmp_path, output_dir):
    config = _write(tmp_path, "bumps", TINY_UNSTABLE)
    assert run(["solve", config]) == EXIT_ERROR


def test_solve_canonical(tmp_path, output_dir):
    config = _write(tmp_path, "tiny", TINY_CANONICAL)
    assert run(["solve", config]) == EXIT_OK

    run_dir = output_dir / "solve-tiny"
    for name in ("u.csv", "u_boundary.csv", "v.csv", "history.csv", "el_residual.csv"):
        assert (run_dir / name).exists(), name
    summary = _summary(run_dir)
    assert summary["converged"] == "true"
    assert float(summary["L_value"]) == pytest.approx(3.141592653589793, rel=1e-6)
    u = pd.read_csv(run_dir / "u.csv")
    assert list(u.columns) == ["i", "j", "x", "y", "value"]


def test_solve_is_deterministic(tmp_path, output_dir):
    config = _write(tmp_path, "tiny", TINY_CANONICAL)
    assert run(["solve", config]) == EXIT_OK
    first = (output_dir / "solve-tiny" / "u.csv").read_bytes()
    assert run(["solve", config]) == EXIT_OK
    assert (output_dir / "solve-tiny" / "u.csv").read_bytes() == first


def test_pogorelov_command(tmp_path, output_dir):
    config = _write(tmp_path, "pog", TINY_POGORELOV)
    code = run(["pogorelov", config, "--gamma", "0.4"])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)

    run_dir = output_dir / "pogorelov-pog"
    for name in ("profile.csv", "residuals.csv", "boundary.csv", "identity.csv", "uniform_variant.csv"):
        assert (run_dir / name).exists(), name
    summary = _summary(run_dir)
    assert float(summary["gamma"]) == pytest.approx(0.4)
    assert float(summary["c"]) == pytest.approx(9.0 / 16.0, rel=1e-6)

def test_effective_config_reproduces_run(tmp_path, output_dir):
    config = _write(tmp_path, "tiny", TINY_CANONICAL)
    assert run(["solve", config]) == EXIT_OK
    run_dir = output_dir / "solve-tiny"
    first_u = (run_dir / "u.csv").read_bytes()
    first_L = _summary(run_dir)["L_value"]

    effective = load_config_from_file(run_dir / "effective_config.toml")
    assert effective.system.output_dir == str(output_dir)
    replay = tmp_path / "replay.toml"
    replay.write_bytes((run_dir / "effective_config.toml").read_bytes())
    assert run(["solve", str(replay)]) == EXIT_OK
    assert (run_dir / "u.csv").read_bytes() == first_u
    assert _summary(run_dir)["L_value"] == first_L


def test_verify_command(tmp_path, output_dir):
    config = _write(tmp_path, "tiny", TINY_VERIFY)
    code = run(["verify", config])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)

    run_dir = output_dir / "verify-tiny"
    for name in ("chords.csv", "chord_functional.csv", "el_test.csv", "sections.csv",
                 "barrier_shells.csv", "checks.csv"):
        assert (run_dir / name).exists(), name
    summary = _summary(run_dir)
    assert summary["converged"] == "true"
    assert float(summary["separation_c_min"]) > 0
    assert float(summary["barrier_c_lower"]) > 0
    checks = pd.read_csv(run_dir / "checks.csv")
    assert len(checks) == int(summary["checks_passed"]) + int(summary["checks_failed"])


def test_compactness_command(tmp_path, output_dir):
    config = _write(tmp_path, "comp", TINY_COMPACTNESS)
    code = run(["compactness", config])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)

    run_dir = output_dir / "compactness-comp"
    table = pd.read_csv(run_dir / "compactness.csv")
    assert len(table) == 3
    assert "sup_delta_0.2" in table.columns
    summary = _summary(run_dir)
    assert summary["perturbation"] == "f"
    assert summary["all_converged"] == "true"


def test_energy_command(tmp_path, output_dir):
    config = _write(tmp_path, "energy", TINY_ENERGY)
    code = run(["energy", config])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)

    run_dir = output_dir / "energy-energy"
    for name in ("u.csv", "det.csv", "history.csv", "F_hypotheses.csv", "linearization.csv"):
        assert (run_dir / name).exists(), name
    summary = _summary(run_dir)
    assert summary["F_hypotheses"] == "passed"
    assert float(summary["det_max"]) <= 10.0 + 1e-6
    history = pd.read_csv(run_dir / "history.csv")
    assert (history["energy"].diff().dropna() <= 0.0).all()


@pytest.mark.parametrize("argv", [
    ["solve", "no_such_file.toml"],
    ["pogorelov", "--gamma", "0.9"],
    ["pogorelov", "--n", "2"],
    ["not-a-command"],
    [],
])
def test_errors_exit_with_one(argv, output_dir):
    assert run(argv) == EXIT_ERROR


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == EXIT_OK
    assert "check-stability" in capsys.readouterr().out
