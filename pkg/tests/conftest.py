import numpy as np
import pytest

from condlab.fields import constant_tensor
from condlab.mesh import generate_disk_mesh, generate_square_mesh
from condlab.operators import fourier_basis


@pytest.fixture(scope="session")
def disk3():
    return generate_disk_mesh(3)


@pytest.fixture(scope="session")
def disk4():
    return generate_disk_mesh(4)


@pytest.fixture(scope="session")
def disk5():
    return generate_disk_mesh(5)


@pytest.fixture(scope="session")
def disk6():
    return generate_disk_mesh(6)


@pytest.fixture(scope="session")
def square8():
    return generate_square_mesh(8)


@pytest.fixture(scope="session")
def basis5(disk5):
    return fourier_basis(disk5, 8)


@pytest.fixture(scope="session")
def basis6(disk6):
    return fourier_basis(disk6, 8)


@pytest.fixture(scope="session")
def identity5(disk5):
    return constant_tensor(disk5, 1.0, 1.0)


@pytest.fixture(scope="session")
def aniso5(disk5):
    return constant_tensor(disk5, 1.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
