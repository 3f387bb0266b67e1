import numpy as np
import pytest

from src.models.core import PerturbationSpec, SystemDims, SystemModel, TimeGrid
from src.models.oracle import random_linear_system, scalar_system


@pytest.fixture
def grid():
    return TimeGrid(0.0, 0.01, 1.0)


@pytest.fixture
def scalar_model():
    """x' = -x + u, y = x."""
    return scalar_system().to_model()


@pytest.fixture
def linear_system():
    return random_linear_system(4, 2, 2, seed=3)


@pytest.fixture
def linear_model(linear_system):
    return linear_system.to_model()


@pytest.fixture
def default_spec():
    def build(model, **config):
        return PerturbationSpec.from_config(model.dims, config)
    return build


@pytest.fixture
def decay_model():
    """x' = -x + u with one parameter entering only as an output bias: y = x + p."""
    def f(x, u, p):
        return -x + u

    def g(x, u, p):
        return x + p

    return SystemModel(SystemDims(m=1, n=1, o=1, P=1), f, g, np.array([0.5]))
