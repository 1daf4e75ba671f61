import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sectorlab import lattice

settings.register_profile(
    "sectorlab",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("sectorlab")

SQ3 = math.sqrt(3.0)


def dimer() -> lattice.Lattice:
    return lattice.from_positions([[0.0, 0.0], [1 / SQ3, 0.0]], [0, 1])


def hexagon() -> lattice.Lattice:
    """A single benzene ring centred on the bisector of a 60 degree sector."""
    return lattice.build_sector(lattice.SectorSpec(n=3, radius_in_a=2.4))


@pytest.fixture(scope="session")
def small_sector():
    return lattice.build_sector(lattice.SectorSpec(n=12, target_size=3000))


@pytest.fixture(scope="session")
def desk_sector():
    """15 degree sector small enough for dense oracles."""
    return lattice.build_sector(lattice.SectorSpec(n=12, target_size=6000))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
