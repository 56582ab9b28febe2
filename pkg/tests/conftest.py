import numpy as np
import pytest

from topoprobe.lattice import build_geometry


@pytest.fixture(scope="session")
def geom2():
    return build_geometry(2)


@pytest.fixture(scope="session")
def geom3():
    return build_geometry(3)


@pytest.fixture(scope="session")
def geom4():
    return build_geometry(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
