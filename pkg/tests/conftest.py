import numpy as np
import pytest

from kltomo import Dims


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_polynomial(rng, degree=4, low=-1.0, high=1.0):
    return np.polynomial.Polynomial(rng.uniform(low, high, degree + 1))


def positive_polynomial(rng, degree=3):
    return np.polynomial.Polynomial(rng.uniform(0.5, 1.5, degree + 1))


def admissible_abel_dims(n_max=8):
    out = []
    for n in range(2, n_max + 1):
        for ell in range(1, n):
            for i in range(ell + 1, n - ell + 1):
                out.append(Dims(n, i, ell))
    return out
