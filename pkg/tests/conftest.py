import numpy as np
import pytest

from kppfronts.coefficients import make_builtin


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def homogeneous():
    return make_builtin("homogeneous", {"mu0": 1.0})


@pytest.fixture(scope="session")
def time_only_sin():
    return make_builtin("time_only", {"mu": "1+0.5*sin(t)", "time_period": 2.0 * np.pi})


@pytest.fixture(scope="session")
def space_periodic_cos():
    return make_builtin("space_periodic", {"mu": "1+0.5*cos(2*pi*x)"})


@pytest.fixture(scope="session")
def advection_const():
    return make_builtin("advection_time", {"mu0": 1.0, "q": "0.5"})
