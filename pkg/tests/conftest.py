import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def finite_difference(f, phi, h=1e-6):
    """Central differences of a scalar function over a real parameter vector."""
    phi = np.asarray(phi, dtype=float)
    g = np.empty_like(phi)
    for i in range(phi.size):
        e = np.zeros_like(phi)
        e[i] = h
        g[i] = (f(phi + e) - f(phi - e)) / (2 * h)
    return g
