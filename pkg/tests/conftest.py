import numpy as np
import pytest

from hybrid_gd import FixedReset, HybridState, QuadraticObjective, TimerConfig


@pytest.fixture
def scalar_obj():
    return QuadraticObjective.from_matrix([[1.0]], [0.0])


@pytest.fixture
def scalar_timer():
    return TimerConfig(0.25, 0.25, FixedReset(0.25))


@pytest.fixture
def scalar_state():
    return HybridState(np.array([1.0]), np.array([1.0]), 0.25)
