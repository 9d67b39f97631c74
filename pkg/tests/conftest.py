import numpy as np
import pytest

from statecloak.dynamics import LinearSystem


@pytest.fixture
def double_integrator():
    """2-state, 1-input double integrator discretized at unit step."""
    return LinearSystem(A=[[1.0, 1.0], [0.0, 1.0]], B=[[0.5], [1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
