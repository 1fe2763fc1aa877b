import numpy as np
import pytest

from hetero import maps, noise, ulam


@pytest.fixture(scope="session")
def paper():
    return maps.PAPER_PARAMS


@pytest.fixture(scope="session")
def geometry(paper):
    return maps.find_geometry(paper)


@pytest.fixture(scope="session")
def ext(paper, geometry):
    return maps.extend_map(paper, geometry)


@pytest.fixture(scope="session")
def spec1000(paper, geometry):
    """Admissible noise spec at n = 1000 (a rides the bound)."""
    return noise.NoiseSpec.admissible(paper, geometry, 1000)


@pytest.fixture(scope="session")
def op256(paper, geometry, spec1000):
    return ulam.build_ulam(paper, spec1000, 256, geometry=geometry)


@pytest.fixture(scope="session")
def pi256(op256):
    return ulam.stationary_density(op256)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(20240817))
