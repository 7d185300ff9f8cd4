from __future__ import annotations

import numpy as np
import pytest

from hyperlab.dynamics.algebra import analyze_matrix
from hyperlab.dynamics.maps import ShearFactor, linear_map, make_conjugated_linear, make_shear_perturbation
from hyperlab.dynamics.profiles import TrigProfile

CAT = [[2, 1], [1, 1]]
COMPANION = [[0, 0, -1], [1, 0, 0], [0, 1, 3]]
CAT_EXPONENT = float(np.log((3 + np.sqrt(5)) / 2))


def unit_shear(direction: int, driver: int, amplitude: float) -> ShearFactor:
    return ShearFactor(direction, driver, TrigProfile.unit_sine(), amplitude)


@pytest.fixture(autouse=True)
def isolated_dirs(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPERLAB_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("HYPERLAB_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.delenv("HYPERLAB_WORKERS", raising=False)


@pytest.fixture(scope="session")
def cat():
    return analyze_matrix(CAT)


@pytest.fixture(scope="session")
def companion():
    return analyze_matrix(COMPANION)


@pytest.fixture(scope="session")
def cat_map(cat):
    return linear_map(cat)


@pytest.fixture(scope="session")
def perturbed(cat):
    """Shear-perturbed cat map; its volume exponents drop below the linear ones."""
    return make_shear_perturbation(cat, [unit_shear(0, 1, 0.1)])


@pytest.fixture(scope="session")
def conjugated(cat):
    """g o L o g^-1 with g a composition of two shears fixing the origin."""
    return make_conjugated_linear(cat, [unit_shear(0, 1, 0.05), unit_shear(1, 0, 0.05)])
