import numpy as np
import pytest

from netresil.sampling import random_networked_system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def dense_siso(rng):
    """Dense-coupled SISO network, minimal nodes, R = I."""
    return random_networked_system(rng, 3, 3)
