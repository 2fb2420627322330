import numpy as np
import pytest

from schrodinger_lab.acceptance import random_instance
from schrodinger_lab.markov import cycle_graph, path_graph, simple_random_walk


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_state():
    from schrodinger_lab.markov import chain_from_conductances

    return chain_from_conductances(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 1.0])


@pytest.fixture
def triangle():
    return simple_random_walk(3, cycle_graph(3))


@pytest.fixture
def path3():
    return simple_random_walk(3, path_graph(3))


@pytest.fixture
def five_node():
    # seed 3 gives a 5-state instance
    return random_instance(3)
