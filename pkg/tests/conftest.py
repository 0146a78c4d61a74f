"""Shared fixtures: ground-state profiles are expensive, so they are shot
once per session and reused across test modules."""

import pytest

from lanedual.exponents import derived_constants
from lanedual.groundstate import shoot


@pytest.fixture(scope="session")
def pack334():
    return derived_constants(3.0, 3.0, 4)


@pytest.fixture(scope="session")
def pack226():
    return derived_constants(2.0, 2.0, 6)


@pytest.fixture(scope="session")
def pack195():
    return derived_constants(1.0, 9.0, 5)


@pytest.fixture(scope="session")
def profile334(pack334):
    return shoot(pack334, r_max=400.0)


@pytest.fixture(scope="session")
def profile226(pack226):
    return shoot(pack226, r_max=400.0)


@pytest.fixture(scope="session")
def profile195(pack195):
    return shoot(pack195, r_max=400.0)


@pytest.fixture(scope="session")
def pack_log6():
    # q = N/(N-2) exactly: the log-corrected decay regime (p = 11/4)
    return derived_constants(2.75, 1.5, 6)


@pytest.fixture(scope="session")
def profile_log6(pack_log6):
    return shoot(pack_log6, r_max=400.0)
