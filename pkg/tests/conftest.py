import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_substochastic(rng, n, terms=4, scale=1.0):
    """Convex combination of random permutation matrices, scaled by ``scale``."""
    x = np.zeros((n, n))
    w = rng.dirichlet(np.ones(terms))
    for lam in w:
        x[np.arange(n), rng.permutation(n)] += lam
    return scale * x


def random_fractional_matching(rng, n, terms=4, scale=1.0):
    """Convex combination of random matchings of the complete graph, as a symmetric matrix."""
    x = np.zeros((n, n))
    for lam in rng.dirichlet(np.ones(terms)):
        perm = rng.permutation(n)
        for a, b in zip(perm[0::2], perm[1::2]):
            x[a, b] += lam
            x[b, a] += lam
    return scale * x
