import random

import pytest

from hetauth.algebra import get_backend
from hetauth.engine import deploy
from hetauth.transport import SimClock


@pytest.fixture(scope="session")
def toy():
    return get_backend("toy")


@pytest.fixture(scope="session")
def toy_wide():
    return get_backend("toy-wide")


@pytest.fixture(scope="session")
def prod():
    return get_backend("production")


@pytest.fixture
def clock():
    return SimClock()


@pytest.fixture
def toy_dep(toy_wide, clock):
    """One gateway, one sensor and two users on the wide toy backend."""
    return deploy(toy_wide, random.Random(11), users=2, clock=clock)


@pytest.fixture(scope="session")
def prod_dep_factory(prod):
    def make(seed=0, users=1, clock=None):
        return deploy(prod, random.Random(seed), users=users, clock=clock or SimClock())

    return make
