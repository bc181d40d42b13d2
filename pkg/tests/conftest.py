import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from numerics import RadialGrid  # noqa: E402


@pytest.fixture(scope="session")
def small_grid():
    """1024-node grid from 1e-6 for fast checks with grid-independent tolerances"""
    return RadialGrid.build(1e-6, 0.1, 1024)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def default_grid():
    """The 4096-node production grid from 1e-8, for checks held to production tolerances"""
    return RadialGrid.build()
