import numpy as np
import pytest

from choqlab.grid import make_grid
from choqlab.riesz import cached_kernel


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 30.0, 800, 1.5)


@pytest.fixture(scope="session")
def kernel3(grid3):
    return cached_kernel(grid3, 2.0)


@pytest.fixture(scope="session")
def grid3_a1(grid3):
    return grid3


@pytest.fixture(scope="session")
def kernel3_a1(grid3):
    return cached_kernel(grid3, 1.0)


@pytest.fixture(scope="session")
def grid5():
    return make_grid(5, 40.0, 900, 2.0)


@pytest.fixture(scope="session")
def kernel5(grid5):
    return cached_kernel(grid5, 2.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def verify_ctx():
    from choqlab.verify import VerifyContext
    return VerifyContext()
