import numpy as np
import pytest

from wavemult.symbols import make_dyadic_partition


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def partition():
    return make_dyadic_partition()


def rel_l2(a, b):
    return float(np.linalg.norm(np.ravel(a - b)) / np.linalg.norm(np.ravel(b)))
