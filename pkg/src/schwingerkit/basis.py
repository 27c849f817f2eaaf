"""Gauss-law basis of the staggered Schwinger lattice and its symmetry sectors.

Fermion sites ``n = 0 .. N_fs-1`` sit on a ring with ``N_fs = 2 * n_spatial``.
Link ``n`` joins site ``n`` to ``n+1 mod N_fs``. Even sites host electrons,
odd sites host positrons, and the charges are ``q_even = -occ`` and
``q_odd = +occ``. Gauss's law reads ``l_n - l_{n-1} = q_n``.

A physical state is fixed by its occupation pattern and the flux on the last
link (the *seed*). States are stored in a :class:`PhysicalStates` table,
sorted by the integer key ``occ * (2*Lambda + 1) + seed + Lambda`` with
occupation bit ``n`` equal to site ``n``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import _core

logger = logging.getLogger(__name__)

MAX_SPATIAL_SITES = 12


class UnsupportedChargeSector(ValueError):
    """Raised for lattice configurations with nonzero total charge."""


# ---------------------------------------------------------------------------
# configuration and single states


@dataclass(frozen=True)
class LatticeConfig:
    """Lattice size and electric-flux cutoffs.

    Parameters
    ----------
    n_spatial : int
        Number of spatial sites; there are ``2 * n_spatial`` fermion sites.
    link_cutoff : int
        Per-link bound ``|l_n| <= link_cutoff``.
    total_energy_cutoff : int or None
        Bound on ``sum(l_n**2)``; ``None`` means unbounded.
    charge : int
        Total charge. Only ``0`` is consistent with periodic boundaries.
    """

    n_spatial: int
    link_cutoff: int = 1
    total_energy_cutoff: int | None = None
    charge: int = 0

    def __post_init__(self):
        if self.n_spatial < 1:
            raise ValueError("n_spatial must be >= 1")
        if self.link_cutoff < 0:
            raise ValueError("link_cutoff must be >= 0")
        if self.total_energy_cutoff is not None and self.total_energy_cutoff < 0:
            raise ValueError("total_energy_cutoff must be >= 0")

    @property
    def n_fermion_sites(self) -> int:
        return 2 * self.n_spatial


@dataclass(frozen=True)
class BasisState:
    """One lattice configuration: occupation bits plus integer link fluxes."""

    occupations: tuple[int, ...]
    fluxes: tuple[int, ...]

    def __post_init__(self):
        if len(self.occupations) != len(self.fluxes):
            raise ValueError("one flux per fermion site is required")
        if len(self.occupations) % 2:
            raise ValueError("number of fermion sites must be even")

    @property
    def n_fermion_sites(self) -> int:
        return len(self.occupations)

    @property
    def charges(self) -> tuple[int, ...]:
        return tuple(o if n % 2 else -o for n, o in enumerate(self.occupations))

    @property
    def pair_count(self) -> int:
        """Number of electrons present (equal to the positron count when Q=0)."""
        return sum(self.occupations[0::2])

    @property
    def electric_energy(self) -> int:
        return sum(l * l for l in self.fluxes)

    @property
    def occ_string(self) -> str:
        return "".join(str(o) for o in self.occupations)

    def satisfies_gauss(self) -> bool:
        nf = self.n_fermion_sites
        return all(
            self.fluxes[n] - self.fluxes[n - 1] == self.charges[n] for n in range(nf)
        )

    def label(self) -> str:
        """Ket notation, e.g. ``|e-e+..>|-1000>``."""
        sym = []
        for n, o in enumerate(self.occupations):
            sym.append(("e+" if n % 2 else "e-") if o else ".")
        return "|" + "".join(sym) + ">|" + "".join(str(l) for l in self.fluxes) + ">"

    def to_dict(self) -> dict:
        return {"occ": self.occ_string, "flux": list(self.fluxes)}

    @classmethod
    def from_strings(cls, occ: str, flux: Sequence[int]) -> "BasisState":
        return cls(tuple(int(c) for c in occ), tuple(int(v) for v in flux))


def translate(state: BasisState, spatial_steps: int) -> BasisState:
    """Shift a configuration by ``2 * spatial_steps`` fermion sites."""
    nf = state.n_fermion_sites
    d = (2 * spatial_steps) % nf
    occ = tuple(state.occupations[(n - d) % nf] for n in range(nf))
    flux = tuple(state.fluxes[(n - d) % nf] for n in range(nf))
    return BasisState(occ, flux)


def apply_parity(state: BasisState, axis: str = "electron") -> BasisState:
    """Reflect the ring through an electron site (default) or a positron site.

    The electron axis passes through site 0 (``n -> -n``); the positron axis
    through site 1 (``n -> 2 - n``). Link ``m`` maps onto the reflected link
    with its flux reversed.
    """
    nf = state.n_fermion_sites
    if axis == "electron":
        c = 0
    elif axis == "positron":
        c = 2
    else:
        raise ValueError(f"unknown parity axis {axis!r}")
    occ = tuple(state.occupations[(c - n) % nf] for n in range(nf))
    flux = tuple(-state.fluxes[(c - 1 - m) % nf] for m in range(nf))
    return BasisState(occ, flux)


def apply_charge_conjugation(state: BasisState, direction: int = +1) -> BasisState:
    """Swap particles and antiparticles, negate fluxes, shift by one fermion site."""
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    nf = state.n_fermion_sites
    occ = tuple(state.occupations[(n - direction) % nf] for n in range(nf))
    flux = tuple(-state.fluxes[(n - direction) % nf] for n in range(nf))
    return BasisState(occ, flux)


# ---------------------------------------------------------------------------
# tables of physical states


def _zigzag(l: np.ndarray) -> np.ndarray:
    # 0, +1, -1, +2, -2, ... -> 0, 1, 2, 3, 4, ...
    l = l.astype(np.int64)
    return np.where(l > 0, 2 * l - 1, -2 * l)


@dataclass
class PhysicalStates:
    """Array-backed table of Gauss-law states for one lattice configuration.

    Attributes
    ----------
    occ : ndarray of uint64
        Occupation bits, bit ``n`` = site ``n``.
    flux : ndarray of int8, shape (n_states, N_fs)
        Link fluxes.
    keys : ndarray of int64
        Sorted lookup keys ``occ * (2*Lambda+1) + flux[:, -1] + Lambda``.
    """

    config: LatticeConfig
    occ: np.ndarray
    flux: np.ndarray
    keys: np.ndarray = field(init=False)

    def __post_init__(self):
        base = 2 * self.config.link_cutoff + 1
        self.keys = self.occ.astype(np.int64) * base + self.flux[:, -1].astype(np.int64) + self.config.link_cutoff
        if np.any(np.diff(self.keys) <= 0):
            order = np.argsort(self.keys, kind="stable")
            self.occ, self.flux, self.keys = self.occ[order], self.flux[order], self.keys[order]
            if np.any(np.diff(self.keys) <= 0):
                raise ValueError("duplicate states in table")

    def __len__(self) -> int:
        return int(self.occ.shape[0])

    @property
    def n_fs(self) -> int:
        return self.config.n_fermion_sites

    def bits(self) -> np.ndarray:
        shifts = np.arange(self.n_fs, dtype=np.uint64)
        return ((self.occ[:, None] >> shifts) & np.uint64(1)).astype(np.int8)

    def pair_counts(self) -> np.ndarray:
        return self.bits()[:, 0::2].sum(axis=1).astype(np.int64)

    def electric_energies(self) -> np.ndarray:
        return (self.flux.astype(np.int64) ** 2).sum(axis=1)

    def lookup(self, occ: np.ndarray, seed: np.ndarray, strict: bool = True) -> np.ndarray:
        """Row indices of states with the given occupations and seed fluxes.

        Missing states give ``-1`` unless ``strict`` is set, which raises.
        """
        lam = self.config.link_cutoff
        seed = np.asarray(seed, dtype=np.int64)
        key = np.asarray(occ, dtype=np.uint64).astype(np.int64) * (2 * lam + 1) + seed + lam
        pos = np.searchsorted(self.keys, key)
        pos_c = np.minimum(pos, len(self) - 1)
        found = (self.keys[pos_c] == key) & (np.abs(seed) <= lam)
        if strict and not np.all(found):
            raise ValueError("state set is not closed under the requested map")
        return np.where(found, pos_c, -1)

    def state(self, i: int) -> BasisState:
        bits = (int(self.occ[i]) >> np.arange(self.n_fs)) & 1
        return BasisState(tuple(int(b) for b in bits), tuple(int(v) for v in self.flux[i]))

    def states(self) -> list[BasisState]:
        return [self.state(i) for i in range(len(self))]

    # symmetry images as row indices

    def _rotate(self, steps: int) -> np.ndarray:
        nf = self.n_fs
        d = (2 * steps) % nf
        if d == 0:
            return self.occ.copy()
        mask = np.uint64((1 << nf) - 1)
        return ((self.occ << np.uint64(d)) | (self.occ >> np.uint64(nf - d))) & mask

    def translation_index(self, strict: bool = True) -> np.ndarray:
        """Row of ``T(state)`` for every row (one spatial step)."""
        nf = self.n_fs
        seed = self.flux[:, (nf - 1 - 2) % nf]
        return self.lookup(self._rotate(1), seed, strict=strict)

    def parity_index(self, strict: bool = True) -> np.ndarray:
        """Row of the electron-axis reflection of every row."""
        nf = self.n_fs
        occ = np.zeros_like(self.occ)
        for n in range(nf):
            src = (-n) % nf
            occ |= ((self.occ >> np.uint64(src)) & np.uint64(1)) << np.uint64(n)
        # l'_{nf-1} = -l_0
        seed = -self.flux[:, 0].astype(np.int64)
        return self.lookup(occ, seed, strict=strict)

    def display_rank(self) -> np.ndarray:
        """Rank of every row under the convention that fixes projection signs.

        States compare first by occupation bitstring (site 0 leftmost, larger
        strings first), then by fluxes in the order ``0, +1, -1, +2, -2, ...``
        read from link ``n_spatial - 1`` cyclically upward.
        """
        nf = self.n_fs
        bitstring = np.zeros(len(self), dtype=np.int64)
        bits = self.bits().astype(np.int64)
        for n in range(nf):
            bitstring |= bits[:, n] << (nf - 1 - n)
        start = self.config.n_spatial - 1
        links = [(start + j) % nf for j in range(nf)]
        zig = [_zigzag(self.flux[:, m]) for m in links]
        order = np.lexsort(tuple(reversed(zig)) + (-bitstring,))
        rank = np.empty(len(self), dtype=np.int64)
        rank[order] = np.arange(len(self), dtype=np.int64)
        return rank


def _check_config(config: LatticeConfig) -> None:
    if config.charge != 0:
        raise UnsupportedChargeSector(
            f"unsupported charge sector Q={config.charge}: periodic boundaries require Q=0"
        )


def enumerate_table(config: LatticeConfig, max_spatial: int = MAX_SPATIAL_SITES) -> PhysicalStates:
    """Enumerate Gauss-law states into a :class:`PhysicalStates` table."""
    _check_config(config)
    if config.n_spatial > max_spatial:
        raise ValueError(
            f"n_spatial={config.n_spatial} exceeds the configured maximum {max_spatial}"
        )
    lt = -1 if config.total_energy_cutoff is None else int(config.total_energy_cutoff)
    occ, flux = _core.enumerate_states(config.n_fermion_sites, config.link_cutoff, lt)
    return PhysicalStates(config, occ, flux)


def enumerate_physical(config: LatticeConfig) -> list[BasisState]:
    """All Gauss-law states of ``config``, each exactly once."""
    return enumerate_table(config).states()


def table_from_states(states: Sequence[BasisState], link_cutoff: int | None = None) -> PhysicalStates:
    """Pack an explicit list of states into a table (deduplicating)."""
    if not states:
        raise ValueError("empty state list")
    nf = states[0].n_fermion_sites
    lam = max(abs(v) for s in states for v in s.fluxes) if link_cutoff is None else link_cutoff
    config = LatticeConfig(nf // 2, lam)
    occ = np.array([sum(o << n for n, o in enumerate(s.occupations)) for s in states], dtype=np.uint64)
    flux = np.array([s.fluxes for s in states], dtype=np.int8).reshape(len(states), nf)
    for s in states:
        if not s.satisfies_gauss():
            raise ValueError(f"state {s.label()} violates Gauss's law")
    base = 2 * lam + 1
    keys = occ.astype(np.int64) * base + flux[:, -1].astype(np.int64) + lam
    _, first = np.unique(keys, return_index=True)
    return PhysicalStates(config, occ[first], flux[first])


# ---------------------------------------------------------------------------
# projected states and bases


@dataclass(frozen=True)
class ProjectedState:
    """Normalized real combination of basis states with sector labels."""

    components: tuple[tuple[BasisState, float], ...]
    k: int = 0
    parity: int | None = None

    @property
    def pair_count(self) -> int:
        return self.components[0][0].pair_count

    @property
    def electric_energy(self) -> int:
        return self.components[0][0].electric_energy

    def norm(self) -> float:
        return math.sqrt(sum(c * c for _, c in self.components))

    def to_dict(self) -> dict:
        return {
            "occ": [s.occ_string for s, _ in self.components],
            "flux": [list(s.fluxes) for s, _ in self.components],
            "coeffs": [float(c) for _, c in self.components],
        }


@dataclass
class _Orbits:
    canon: np.ndarray
    size: np.ndarray
    shift: np.ndarray
    rank: np.ndarray


def _orbits(table: PhysicalStates) -> _Orbits:
    rank = table.display_rank()
    trans = table.translation_index()
    canon, size, shift = _core.orbit_reduce(np.ascontiguousarray(trans, dtype=np.int64), rank)
    return _Orbits(np.asarray(canon), np.asarray(size), np.asarray(shift), rank)


def _normalize_k(k: int, n_spatial: int) -> int:
    if k == 0:
        return 0
    if abs(k) == 1 and n_spatial % 2 == 0:
        return 1
    raise ValueError(
        f"invalid momentum k={k} for n_spatial={n_spatial}: only the real sectors "
        "k=0 and the antisymmetric k=1 (even n_spatial) are supported"
    )


@dataclass
class ProjectedBasis:
    """Ordered orthonormal basis of projected states in one symmetry sector.

    The basis is stored as a sparse ``(n_physical, dim)`` coefficient matrix
    over a :class:`PhysicalStates` table; :attr:`states` expands it into
    :class:`ProjectedState` objects on demand.
    """

    table: PhysicalStates
    projection: sp.csc_matrix
    k: int | None
    parity: int | None
    energies: np.ndarray
    pairs: np.ndarray
    leads: np.ndarray
    truncation: int | None = None

    def __len__(self) -> int:
        return int(self.projection.shape[1])

    @property
    def dim(self) -> int:
        return len(self)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @property
    def config(self) -> LatticeConfig:
        return self.table.config

    def state(self, j: int) -> ProjectedState:
        col = self.projection.getcol(j).tocoo()
        lead = int(self.leads[j])
        rows = sorted(zip(col.row.tolist(), col.data.tolist()), key=lambda rc: (rc[0] != lead, rc[0]))
        comps = tuple((self.table.state(r), float(c)) for r, c in rows)
        return ProjectedState(comps, 0 if self.k is None else self.k, self.parity)

    @property
    def states(self) -> list[ProjectedState]:
        return [self.state(j) for j in range(len(self))]

    def __getitem__(self, j: int) -> ProjectedState:
        return self.state(j)

    def to_json(self) -> str:
        return json.dumps([s.to_dict() for s in self.states])

    def _subset(self, cols: np.ndarray, truncation=None) -> "ProjectedBasis":
        return ProjectedBasis(
            self.table,
            self.projection[:, cols].tocsc(),
            self.k,
            self.parity,
            self.energies[cols],
            self.pairs[cols],
            self.leads[cols],
            self.truncation if truncation is None else truncation,
        )


def _bitstring_keys(table: PhysicalStates, rows: np.ndarray) -> np.ndarray:
    nf = table.n_fs
    bits = ((table.occ[rows][:, None] >> np.arange(nf, dtype=np.uint64)) & np.uint64(1)).astype(np.int64)
    return (bits << np.arange(nf - 1, -1, -1, dtype=np.int64)).sum(axis=1)


def _assemble(table, projection, k, parity, leads, truncation=None) -> ProjectedBasis:
    energies_all = table.electric_energies()
    pairs_all = table.pair_counts()
    energies = energies_all[leads]
    pairs = pairs_all[leads]
    rank = table.display_rank()
    order = np.lexsort((rank[leads], _bitstring_keys(table, leads), pairs, energies))
    projection = projection.tocsc()[:, order]
    basis = ProjectedBasis(table, projection.tocsc(), k, parity, energies[order], pairs[order], leads[order], truncation)
    if truncation is not None:
        basis = truncate_total_energy(basis, truncation)
    return basis


def _orbit_matrix(table: PhysicalStates, orb: _Orbits, k: int):
    reps = np.unique(orb.canon)
    if k == 1:
        reps = reps[orb.size[reps] % 2 == 0]
    col_of = np.full(len(table), -1, dtype=np.int64)
    col_of[reps] = np.arange(len(reps))
    cols = col_of[orb.canon]
    keep = cols >= 0
    rows = np.nonzero(keep)[0]
    vals = 1.0 / np.sqrt(orb.size[rows].astype(float))
    if k == 1:
        vals = vals * np.where(orb.shift[rows] % 2 == 0, 1.0, -1.0)
    mat = sp.csc_matrix((vals, (rows, cols[rows])), shape=(len(table), len(reps)))
    return mat, reps


def _table_of(states) -> PhysicalStates:
    if isinstance(states, PhysicalStates):
        return states
    if isinstance(states, LatticeConfig):
        return enumerate_table(states)
    return table_from_states(list(states))


def project_momentum(states, k: int = 0) -> ProjectedBasis:
    """Project onto a real translation sector.

    Parameters
    ----------
    states : PhysicalStates, LatticeConfig or sequence of BasisState
        Translation-closed set of states.
    k : int
        ``0`` for the symmetric sector, ``1`` (or ``-1``) for the sector odd
        under a one-site translation, available for even ``n_spatial``.
    """
    table = _table_of(states)
    k = _normalize_k(k, table.config.n_spatial)
    orb = _orbits(table)
    mat, reps = _orbit_matrix(table, orb, k)
    return _assemble(table, mat, k, None, reps)


def _parity_combination(table: PhysicalStates, orb: _Orbits, reps: np.ndarray, sign: int):
    par = table.parity_index()
    partner = orb.canon[par[reps]]
    pos = {int(r): j for j, r in enumerate(reps)}
    rows, cols, vals, leads = [], [], [], []
    c = 0
    for j, r in enumerate(reps):
        p = int(partner[j])
        if p == r:
            if sign == 1:
                rows.append(j); cols.append(c); vals.append(1.0)
                leads.append(int(r)); c += 1
            continue
        # each unordered pair once; the lower-ranked orbit carries the + sign
        if orb.rank[r] > orb.rank[p]:
            continue
        rows += [j, pos[p]]
        cols += [c, c]
        vals += [1 / math.sqrt(2), sign / math.sqrt(2)]
        leads.append(int(r))
        c += 1
    comb = sp.csc_matrix((vals, (rows, cols)), shape=(len(reps), c))
    return comb, np.array(leads, dtype=np.int64)


def project_parity(basis: ProjectedBasis, P: int) -> ProjectedBasis:
    """Split a ``k=0`` basis into parity eigenstates with eigenvalue ``P``."""
    if P not in (+1, -1):
        raise ValueError("parity must be +1 or -1")
    if basis.k != 0:
        raise ValueError("parity projection requires the k=0 sector")
    if basis.parity is not None:
        raise ValueError("basis is already parity-projected")
    table = basis.table
    orb = _orbits(table)
    mat, reps = _orbit_matrix(table, orb, 0)
    comb, leads = _parity_combination(table, orb, reps, P)
    return _assemble(table, mat @ comb, 0, P, leads, basis.truncation)


def parity_basis(states, P: int) -> ProjectedBasis:
    """Parity projection of the full state set, without momentum reduction.

    Used for ``n_spatial = 1`` where the translation group is trivial.
    """
    table = _table_of(states)
    if P not in (+1, -1):
        raise ValueError("parity must be +1 or -1")
    idx = np.arange(len(table), dtype=np.int64)
    rank = table.display_rank()
    orb = _Orbits(idx, np.ones(len(table), dtype=np.int32), np.zeros(len(table), dtype=np.int32), rank)
    eye = sp.identity(len(table), format="csc")
    comb, leads = _parity_combination(table, orb, idx, P)
    return _assemble(table, eye @ comb, None, P, leads)


def sector_basis(config: LatticeConfig, k: int | None = 0, P: int | None = None) -> ProjectedBasis:
    """Convenience: enumerate ``config`` and project onto ``(k, P)``."""
    table = enumerate_table(config)
    if k is None:
        if P is None:
            eye = sp.identity(len(table), format="csc")
            return _assemble(table, eye, None, None, np.arange(len(table)))
        return parity_basis(table, P)
    basis = project_momentum(table, k)
    return basis if P is None else project_parity(basis, P)


def truncate_total_energy(basis: ProjectedBasis, lt: int) -> ProjectedBasis:
    """Keep projected states with ``sum(l**2) <= lt``; order is preserved."""
    keep = np.nonzero(basis.energies <= lt)[0]
    out = basis._subset(keep, truncation=lt)
    if out.is_empty:
        logger.warning("total-energy cutoff %s leaves an empty basis", lt)
    return out


# ---------------------------------------------------------------------------
# dimension counting


@dataclass(frozen=True)
class ScalingRow:
    n_spatial: int
    d_lattice: int
    d_physical: int
    d_k0: int | None
    d_even: int | None
    d_odd: int | None

    @staticmethod
    def qubits(d: int | None) -> int | None:
        if d is None:
            return None
        return 0 if d <= 1 else math.ceil(math.log2(d))

    @property
    def qubit_counts(self) -> dict:
        return {
            "lattice": 6 * self.n_spatial,
            "physical": self.qubits(self.d_physical),
            "k0": self.qubits(self.d_k0),
            "even": self.qubits(self.d_even),
            "odd": self.qubits(self.d_odd),
        }

    def as_dict(self) -> dict:
        return {
            "n_spatial": self.n_spatial,
            "d_lattice": self.d_lattice,
            "d_physical": self.d_physical,
            "d_k0": self.d_k0,
            "d_even": self.d_even,
            "d_odd": self.d_odd,
            **{f"qubits_{k}": v for k, v in self.qubit_counts.items()},
        }


def sector_dimensions(table: PhysicalStates) -> tuple[int, int | None, int | None]:
    """``(D_k0, D_even, D_odd)`` from orbit counting, without building bases.

    Translation and parity act as signless permutations here, so every orbit
    gives one ``k=0`` state; a parity-invariant orbit is even and a pair of
    exchanged orbits gives one even and one odd state.
    """
    n_s = table.config.n_spatial
    par = table.parity_index()
    if n_s == 1:
        fixed = int(np.count_nonzero(par == np.arange(len(table))))
        n = len(table)
        return n, (n + fixed) // 2, (n - fixed) // 2
    orb = _orbits(table)
    reps = np.unique(orb.canon)
    n_orb = len(reps)
    if n_s % 2:
        return n_orb, None, None
    fixed = int(np.count_nonzero(orb.canon[par[reps]] == reps))
    return n_orb, (n_orb + fixed) // 2, (n_orb - fixed) // 2


def scaling_table(n_spatial_list: Iterable[int], max_spatial: int = MAX_SPATIAL_SITES) -> list[ScalingRow]:
    """Hilbert-space dimensions at ``Lambda = 1`` for each lattice size."""
    rows = []
    for n in n_spatial_list:
        table = enumerate_table(LatticeConfig(n, 1), max_spatial=max_spatial)
        d_k0, d_even, d_odd = sector_dimensions(table)
        rows.append(ScalingRow(n, 64 ** n, len(table), None if n == 1 else d_k0, d_even, d_odd))
        logger.info("n_spatial=%d: D_physical=%d", n, len(table))
    return rows


def exponential_fit(n: Sequence[int], d: Sequence[int]) -> tuple[float, float]:
    """Least-squares fit ``d ~ a * exp(b * n)`` on log-dimensions; returns ``(a, b)``."""
    n = np.asarray(n, dtype=float)
    y = np.log(np.asarray(d, dtype=float))
    b, log_a = np.polyfit(n, y, 1)
    return float(math.exp(log_a)), float(b)
