import math

import pytest

from agents.solver_agent import DEFAULT_L, SolverConfig
from tools.grid import GridGeometry

# 17 x 17 nodes; dt well inside h^2/(4 kappa) for every kappa <= 0.35
COARSE = {"N": 16, "dt": 0.04}


@pytest.fixture
def fine_grid():
    return GridGeometry(DEFAULT_L, 64)


@pytest.fixture
def coarse_grid():
    return GridGeometry(DEFAULT_L, 16)


@pytest.fixture
def coarse_numerics():
    return dict(COARSE)


@pytest.fixture
def coarse_config():
    def make(theta=0.7, kappa=0.02, **overrides):
        settings = {**COARSE, **overrides}
        return SolverConfig.from_overrides(theta, kappa, **settings)

    return make


@pytest.fixture
def pi_squared():
    return math.pi ** 2
