import numpy as np
import pytest

from adawave.mesh import TriMesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def unit_mesh():
    return TriMesh.structured((0.0, 1.0, 0.0, 1.0), 0.125)


@pytest.fixture
def omega_mesh():
    return TriMesh.structured((-3.0, 3.0, -3.0, 3.0), 0.5)
