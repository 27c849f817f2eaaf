"""Lattice Schwinger model toolkit."""
from ._core import BACKEND
from .basis import LatticeConfig, scaling_table, sector_basis
from .hamiltonian import HamiltonianParams, build_hamiltonian, pauli_decompose
from .mitigation import ZnePointSet, readout_calibrate, mitigate_counts, zne_extrapolate
from .spectra import eigensolve, evolve_exact, vacuum_properties

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HamiltonianParams",
    "LatticeConfig",
    "ZnePointSet",
    "build_hamiltonian",
    "eigensolve",
    "evolve_exact",
    "mitigate_counts",
    "pauli_decompose",
    "readout_calibrate",
    "scaling_table",
    "sector_basis",
    "vacuum_properties",
    "zne_extrapolate",
]
