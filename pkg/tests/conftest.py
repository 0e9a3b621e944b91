import os

import pytest
from hypothesis import settings

from closednet.model import NetworkSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def one_server():
    """r = 1, k = 2 with loads (0.5, 2)."""
    return NetworkSpec(N_i=[200], lam=[4.0], p=[[0.5, 0.5]], mu=[4.0, 1.0])


@pytest.fixture
def shared_hub():
    """Clients 1-3 fed by one server each, the bottleneck by both."""
    return NetworkSpec(
        N_i=[100, 100], lam=[4.0, 4.0],
        p=[[0.3, 0.2, 0.0, 0.5], [0.0, 0.0, 0.5, 0.5]],
        mu=[1.0, 1.0, 1.25, 1.0],
        departures=[{"kind": "gamma", "shape": 2.0}] * 4,
    )
