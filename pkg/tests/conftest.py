import numpy as np
import pytest

from gmkeldysh.coefficients import preset
from gmkeldysh.geometry import DomainSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def spec():
    return DomainSpec()


@pytest.fixture(scope="session")
def coeffs():
    return preset("default")
