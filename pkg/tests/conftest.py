import numpy as np
import pytest

from mtpsk.freqplan import plan_frequencies

F_C = 2.45e9
GCD = 1e6


@pytest.fixture(scope="session")
def plan6():
    return plan_frequencies(F_C, 6, GCD, 0)


@pytest.fixture(scope="session")
def plan5():
    return plan_frequencies(F_C, 5, GCD, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
