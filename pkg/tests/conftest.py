import numpy as np
import pytest

from stcnet import numerics as nx


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def param(rng, shape, name, scale=1.0):
    return nx.Parameter(rng.normal(scale=scale, size=shape).astype(np.float64), name, dtype=np.float64)
