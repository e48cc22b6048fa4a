import numpy as np
import pytest

from meshsal.shapes import cube, grid, icosahedron, icosphere, terrain


@pytest.fixture(scope="session")
def unit_cube():
    return cube()


@pytest.fixture(scope="session")
def ico():
    return icosahedron()


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def terrain10k():
    return terrain()


@pytest.fixture(scope="session")
def plane():
    return grid(10, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
