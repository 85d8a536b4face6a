import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20151213)


def unit(rng, n):
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z / np.linalg.norm(z)
