import numpy as np
import pytest

from kdebo.rng import SeedStream


@pytest.fixture
def stream():
    return SeedStream(1234)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
