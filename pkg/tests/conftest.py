import numpy as np
import pytest

from minorflow.generators import generate
from minorflow.graphs import Graph
from minorflow.routing import build_routing, default_params
from minorflow.simulator import network


def random_connected_graph(seed: int, n_lo: int = 5, n_hi: int = 40, w_hi: int = 8) -> Graph:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    p = min(1.0, 2.5 / max(n - 1, 1) + 0.25 * rng.random())
    return generate(f"er:{n}:{p}:w1-{w_hi}", seed=seed)


def random_proper_demand(rng: np.random.Generator, n: int) -> np.ndarray:
    d = rng.standard_normal(n)
    return d - d.mean()


def make_routing(g: Graph, seed: int = 0):
    net = network(g)
    return net, build_routing(net, default_params(g, seed=seed))


@pytest.fixture
def p3():
    return generate("path:3:unit")


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
