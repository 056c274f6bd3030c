import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from netscreen.graph import ContactNetwork, generate_erdos_renyi, spectral_radius  # noqa: E402
from netscreen.epidemic import EpidemicParams  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def path_graph(n):
    return ContactNetwork(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves):
    return ContactNetwork(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_graph(n):
    return ContactNetwork(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


@pytest.fixture
def desk_world():
    """The 30-node graph and epidemic used by the learning checks."""
    net = generate_erdos_renyi(30, 0.15, 1)
    params = EpidemicParams(beta=10 * 0.05 / spectral_radius(net), gamma=0.05)
    return net, params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
