import numpy as np
import pytest

from schwingerkit.basis import LatticeConfig, sector_basis, truncate_total_energy
from schwingerkit.hamiltonian import HamiltonianParams


@pytest.fixture(scope="session")
def params():
    return HamiltonianParams(0.6, 0.1)


@pytest.fixture(scope="session")
def even_sector():
    return sector_basis(LatticeConfig(2, 1), 0, +1)


@pytest.fixture(scope="session")
def two_qubit_sector(even_sector):
    return truncate_total_energy(even_sector, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def two_qubit_decomposition(two_qubit_sector, params):
    from schwingerkit.hamiltonian import build_hamiltonian, pauli_decompose

    return pauli_decompose(build_hamiltonian(two_qubit_sector, params))
