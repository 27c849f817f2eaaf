"""Kogut-Susskind Hamiltonian, observables and two-qubit Pauli decomposition.

In spin language a site is *up* when an even site is occupied or an odd site
is empty. The Hamiltonian on the Gauss-law states is::

    H = x * sum_n (s+_n L-_n s-_{n+1} + h.c.) + sum_n l_n**2
        + (mu / 2) * sum_n (-1)**n sz_n

The hopping term creates or annihilates a particle pair on neighbouring sites
while lowering or raising the flux on the link between them. No extra
fermionic sign strings are attached.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import PhysicalStates, ProjectedBasis

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_1Q = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}

# O_1 .. O_15: left letter acts on q1 (most significant), right letter on q0
PAULI_LABELS = (
    "XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ",
    "IX", "IY", "IZ", "XI", "YI", "ZI",
)


def pauli_matrix(label: str) -> np.ndarray:
    """Matrix of a Pauli string; the first letter is the most significant qubit."""
    out = np.array([[1.0 + 0j]])
    for ch in label:
        try:
            out = np.kron(out, PAULI_1Q[ch])
        except KeyError:
            raise ValueError(f"unknown Pauli label {label!r}") from None
    return out


@dataclass(frozen=True)
class HamiltonianParams:
    """Dimensionless couplings: ``x = 1/(a g)^2`` and ``mu = 2 m /(a g^2)``."""

    x: float
    mu: float

    def __post_init__(self):
        if self.x < 0:
            raise ValueError("x must be non-negative")


@dataclass
class OperatorMatrix:
    """Real symmetric matrix of an operator over a projected basis."""

    matrix: np.ndarray
    basis: ProjectedBasis | None = None
    label: str = ""

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        if sp.issparse(m):
            asym = abs(m - m.T).max() if m.nnz else 0.0
        else:
            asym = np.max(np.abs(m - m.T)) if m.size else 0.0
        if asym > 1e-12:
            raise ValueError(f"operator matrix not symmetric (max asymmetry {asym:.3g})")
        if self.basis is not None and m.shape[0] != len(self.basis):
            raise ValueError("matrix dimension does not match the basis")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.dense():
            w.writerow([format_float(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"label": self.label, "matrix": self.dense().tolist()})


def format_float(v: float) -> str:
    """Fixed 17-significant-digit rendering used by every CSV writer."""
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# Gauss-basis operators


def _hopping_pairs(table: PhysicalStates):
    """Rows ``(i, j)`` with ``j`` reached from ``i`` by one lowering hop."""
    nf = table.n_fs
    lt = table.config.total_energy_cutoff
    lam = table.config.link_cutoff
    bits = table.bits()
    up = bits.copy()
    up[:, 1::2] ^= 1
    e2 = table.electric_energies()
    src_all, dst_all = [], []
    for n in range(nf):
        m = (n + 1) % nf
        ok = (up[:, n] == 0) & (up[:, m] == 1)
        new_l = table.flux[:, n].astype(np.int64) - 1
        ok &= np.abs(new_l) <= lam
        new_e2 = e2 - table.flux[:, n].astype(np.int64) ** 2 + new_l ** 2
        if lt is not None:
            ok &= new_e2 <= lt
        rows = np.nonzero(ok)[0]
        flip = np.uint64((1 << n) | (1 << m))
        occ = table.occ[rows] ^ flip
        seed = table.flux[rows, nf - 1].astype(np.int64)
        if n == nf - 1:
            seed = seed - 1
        dst = table.lookup(occ, seed)
        src_all.append(rows)
        dst_all.append(dst)
    return np.concatenate(src_all), np.concatenate(dst_all)


def mass_diagonal(table: PhysicalStates) -> np.ndarray:
    """``(1/2) sum_n (-1)**n sz_n``; equals ``2 * pairs - n_spatial``."""
    return 2.0 * table.pair_counts() - table.config.n_spatial


def full_hamiltonian(table: PhysicalStates, params: HamiltonianParams) -> sp.csr_matrix:
    """Sparse Hamiltonian over every Gauss-law state of ``table``."""
    src, dst = _hopping_pairs(table)
    n = len(table)
    hop = sp.coo_matrix((np.full(len(src), params.x), (dst, src)), shape=(n, n))
    diag = table.electric_energies().astype(float) + params.mu * mass_diagonal(table)
    return (hop + hop.T + sp.diags(diag)).tocsr()


def _project(basis: ProjectedBasis, op: sp.spmatrix) -> sp.csr_matrix:
    p = basis.projection
    return (p.T @ op @ p).tocsr()


def build_hamiltonian(basis: ProjectedBasis, params: HamiltonianParams, sparse: bool = False) -> OperatorMatrix:
    """Hamiltonian matrix in a projected basis.

    Parameters
    ----------
    basis : ProjectedBasis
    params : HamiltonianParams
    sparse : bool
        Return a CSR matrix instead of a dense array (large sectors).
    """
    table = basis.table
    src, dst = _hopping_pairs(table)
    n = len(table)
    hop = sp.coo_matrix((np.full(len(src), params.x), (dst, src)), shape=(n, n))
    h = _project(basis, hop + hop.T)
    # every projected state has a single pair count and flux energy, so the
    # diagonal is set from integers rather than from coefficient products
    diag = basis.energies.astype(float) + params.mu * (2.0 * basis.pairs - table.config.n_spatial)
    h = h - sp.diags(h.diagonal()) + sp.diags(diag)
    h = h.tocsr() if sparse else h.toarray()
    # symmetrize away rounding from the projection products
    h = (h + h.T) * 0.5
    return OperatorMatrix(h, basis, "H")


OBSERVABLES = ("pair_count", "electric_energy", "chiral_condensate", "pair_probability")


def observable_diagonal(kind: str, table: PhysicalStates) -> np.ndarray:
    """Per-state value of a diagonal observable on the Gauss basis.

    ``chiral_condensate`` is ``(sum_n occ_n - n_spatial) / N_fs``, which is
    ``-1/2`` on the empty lattice and rises by ``1/n_spatial`` per pair.
    ``pair_probability`` is the projector onto states with exactly one pair.
    """
    pairs = table.pair_counts()
    if kind == "pair_count":
        return pairs.astype(float)
    if kind == "electric_energy":
        return table.electric_energies().astype(float)
    if kind == "chiral_condensate":
        return (2.0 * pairs - table.config.n_spatial) / table.n_fs
    if kind == "pair_probability":
        return (pairs == 1).astype(float)
    raise ValueError(f"unknown observable {kind!r}; expected one of {OBSERVABLES}")


@dataclass
class Observable:
    kind: str
    operator: OperatorMatrix


def build_observable(kind: str, basis: ProjectedBasis) -> Observable:
    d = observable_diagonal(kind, basis.table)
    m = _project(basis, sp.diags(d)).toarray()
    return Observable(kind, OperatorMatrix((m + m.T) * 0.5, basis, kind))


# ---------------------------------------------------------------------------
# Pauli decomposition


@dataclass
class PauliDecomposition:
    """``matrix = shift * I + sum_i coefficients[i] * O_i``."""

    labels: tuple[str, ...]
    coefficients: np.ndarray
    shift: float

    def reconstruct(self) -> np.ndarray:
        n = len(self.labels[0])
        out = self.shift * np.eye(2 ** n, dtype=complex)
        for lab, c in zip(self.labels, self.coefficients):
            out = out + c * pauli_matrix(lab)
        return out

    def nonzero(self, tol: float = 1e-12) -> list[tuple[str, float]]:
        return [(l, float(c)) for l, c in zip(self.labels, self.coefficients) if abs(c) > tol]

    def coefficient(self, label: str) -> float:
        return float(self.coefficients[self.labels.index(label)])

    def to_json(self) -> str:
        ident = "I" * len(self.labels[0])
        items = [{"label": ident, "coefficient": float(self.shift)}]
        items += [{"label": l, "coefficient": float(c)} for l, c in zip(self.labels, self.coefficients)]
        return json.dumps(items)


def pauli_labels(n_qubits: int) -> tuple[str, ...]:
    """Non-identity Pauli strings; the two-qubit list follows ``PAULI_LABELS``."""
    if n_qubits == 2:
        return PAULI_LABELS
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]
    return tuple(l for l in labels if set(l) != {"I"})


def pauli_decompose(matrix) -> PauliDecomposition:
    """Expand a ``2^n x 2^n`` Hermitian matrix in the Pauli basis.

    The constant shift is ``Tr(M) / 2^n`` and the coefficients are
    ``c_i = Tr[O_i (M - shift)] / 2^n``.
    """
    m = matrix.dense() if isinstance(matrix, OperatorMatrix) else np.asarray(matrix)
    d = m.shape[0]
    n = int(round(math.log2(d))) if d > 0 else 0
    if d != 2 ** n or m.shape != (d, d) or n < 1:
        raise ValueError("matrix dimension must be a power of two")
    shift = float(np.real(np.trace(m))) / d
    rest = m - shift * np.eye(d)
    labels = pauli_labels(n)
    coeffs = np.array([np.real(np.trace(pauli_matrix(l) @ rest)) / d for l in labels])
    return PauliDecomposition(labels, coeffs, shift)


def pad_to_qubits(m: np.ndarray) -> np.ndarray:
    """Embed a matrix in the smallest power-of-two dimension with zero padding."""
    d = m.shape[0]
    n = max(1, math.ceil(math.log2(d))) if d > 1 else 1
    out = np.zeros((2 ** n, 2 ** n))
    out[:d, :d] = m
    return out
