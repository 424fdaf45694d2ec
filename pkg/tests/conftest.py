import numpy as np
import pytest

from eljunction.model import DisorderRealization, ModelParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_params():
    # L=8 keeps dense checks fast while keeping both domains nontrivial
    return ModelParams(L=8, M=4, N=2)


def draw(params, seed=7):
    return DisorderRealization.draw(seed, params.W, params.M)
