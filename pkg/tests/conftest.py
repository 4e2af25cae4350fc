import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reinforced_qsd.green_lab import AbsorbingChain

# numba compiles on first call, so the first example of a property can be slow
settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def two_state():
    return AbsorbingChain(np.array([[-2.0, 1.0], [1.0, -2.0]]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
