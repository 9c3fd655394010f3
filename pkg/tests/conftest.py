"""Fixtures compartidos: disco unidad discretizado y el caso canónico."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.ma_dirichlet import GridFunction  # noqa: E402
from core.problem_data import load_problem  # noqa: E402
from geometry.domain_geometry import Discretization, make_disk  # noqa: E402
from utils.config_utils import DataConfig  # noqa: E402


def square_norm(points: np.ndarray) -> np.ndarray:
    return np.sum(np.atleast_2d(points) ** 2, axis=1)


@pytest.fixture(scope="session")
def disk():
    return make_disk(1.0)


@pytest.fixture(scope="session")
def disc(disk):
    """Disco unidad con n = 24 (esténcil de 4 líneas) y m = 64."""
    return Discretization.build(disk, 24, 64)


@pytest.fixture(scope="session")
def canonical_data(disc):
    """f = 4, sigma = 1, A = 2."""
    return load_problem(DataConfig(), disc)


@pytest.fixture(scope="session")
def paraboloid(disc):
    """u = |x|², minimizador exacto del caso canónico."""
    return GridFunction.from_function(disc, square_norm, convex=True)


@pytest.fixture(scope="session")
def half_paraboloid(disc):
    """u = |x|²/2."""
    return GridFunction.from_function(disc, lambda p: 0.5 * square_norm(p), convex=True)


@pytest.fixture(scope="session")
def canonical_v(disc):
    """v = (1 − |x|²)/4 con traza nula."""
    return GridFunction.from_function(disc, lambda p: 0.25 * (1.0 - square_norm(p)), name="v")
