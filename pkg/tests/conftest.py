import numpy as np
import pytest

from cgbg import gen_random_cgbg
from oracles import make_game


@pytest.fixture
def fig4_game():
    """Three agents, two types each, scopes {0,1} and {1,2}."""
    return make_game(np.random.default_rng(4), 3, [(0, 1), (1, 2)], 2, 2)


@pytest.fixture
def small_random_game():
    return gen_random_cgbg(4, 2, 2, 2, seed=7)
