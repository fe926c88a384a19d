import numpy as np
import pytest

from calderon.geometry import DiskDomain, build_disk_mesh
from calderon.scenarios import load_scenario

P_STAR = 0.2 + 0.1j
BUMP_WIDTH = 0.25


def gaussian_bump(z, center=P_STAR, width=BUMP_WIDTH, amplitude=1.0):
    return amplitude * np.exp(-np.abs(np.asarray(z) - center) ** 2 / width**2)


@pytest.fixture(scope="session")
def full_domain():
    return DiskDomain()


@pytest.fixture(scope="session")
def quarter_domain():
    return DiskDomain(gamma0=(0.0, np.pi / 2))


@pytest.fixture(scope="session")
def mesh_mid(full_domain):
    """Full-data disk at moderate resolution for cheap unit tests."""
    return build_disk_mesh(0.04, full_domain)


@pytest.fixture(scope="session")
def mesh_coarse(full_domain):
    return build_disk_mesh(0.08, full_domain)


@pytest.fixture(scope="session")
def mesh_fine(full_domain):
    return build_disk_mesh(0.02, full_domain)


@pytest.fixture(scope="session")
def ref_scenario():
    """The acceptance reference scenario (quarter-circle gamma0, bump at p*);
    epsilon raised to 1.0 so the Carleman constraint h <= epsilon/5 admits
    the reference h list."""
    return load_scenario({"name": "reference", "seed": 0, "epsilon": 1.0})


@pytest.fixture(scope="session")
def ref_mesh(ref_scenario):
    return ref_scenario.build_mesh()


@pytest.fixture(scope="session")
def quarter_mesh_mid(quarter_domain):
    return build_disk_mesh(0.04, quarter_domain)
