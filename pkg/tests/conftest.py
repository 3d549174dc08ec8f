import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from optpir.params import SchemeConfig, derive_params

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def p322():
    return derive_params(SchemeConfig(3, 2, 2))


@pytest.fixture(scope="session")
def p323():
    return derive_params(SchemeConfig(3, 2, 3))
