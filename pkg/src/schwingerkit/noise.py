"""Density-matrix simulation with a depolarizing CNOT channel and shot sampling.

Every physical CNOT is followed by ``rho -> (1 - eps) rho + eps * Tr_pair(rho) (x) I/4``
on its two qubits. Noise folding replaces each CNOT of the circuit by ``r``
copies (``r`` odd), each followed by the channel.

Random numbers come from ``numpy.random.default_rng`` (PCG64). Sub-streams
for independent tasks are derived with ``numpy.random.SeedSequence(seed).spawn``.
"""
from __future__ import annotations

import itertools
import json
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .circuits import (
    Circuit,
    build_propagator_circuit,
    build_trotter_circuit,
    TrotterPlan,
    cartan_decompose_symmetric,
    gate_unitary,
    traceless_matrix,
)
from .hamiltonian import (
    HamiltonianParams,
    PauliDecomposition,
    build_hamiltonian,
    pauli_decompose,
    pauli_matrix,
)
from .spectra import TimeSeries

DEFAULT_EPS = 0.03


@lru_cache(maxsize=64)
def _pair_paulis(qubits: tuple[int, ...], n: int) -> tuple[np.ndarray, ...]:
    mats = []
    for letters in itertools.product("IXYZ", repeat=len(qubits)):
        lab = ["I"] * n
        for q, ch in zip(qubits, letters):
            lab[n - 1 - q] = ch
        mats.append(pauli_matrix("".join(lab)))
    return tuple(mats)


def depolarize(rho: np.ndarray, qubits: Sequence[int], eps: float, n: int) -> np.ndarray:
    """Depolarize ``qubits`` of an ``n``-qubit density matrix with strength ``eps``.

    Uses the twirl identity ``Tr_S(rho) (x) I/d = (1/d^2) sum_P P rho P``
    over the Pauli strings ``P`` supported on the ``k`` qubits ``S``.
    """
    if eps == 0:
        return rho
    k = len(qubits)
    if k == n:
        return (1 - eps) * rho + eps * np.trace(rho) * np.eye(2 ** n) / 2 ** n
    twirl = sum(p @ rho @ p for p in _pair_paulis(tuple(qubits), n)) / 4 ** k
    return (1 - eps) * rho + eps * twirl


@dataclass
class NoiseModel:
    """CNOT depolarizing strength and per-qubit readout confusion matrices.

    ``readout[q][true, observed]`` is row-stochastic.
    """

    eps: float = DEFAULT_EPS
    readout: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")
        for q, m in self.readout.items():
            m = np.asarray(m, dtype=float)
            if m.shape != (2, 2) or np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1) > 1e-12):
                raise ValueError(f"readout matrix of qubit {q} is not row-stochastic")
            self.readout[q] = m

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(0.0)

    @classmethod
    def symmetric_readout(cls, p: float, n_qubits: int, eps: float = 0.0) -> "NoiseModel":
        m = np.array([[1 - p, p], [p, 1 - p]])
        return cls(eps, {q: m.copy() for q in range(n_qubits)})

    def readout_matrix(self, n_qubits: int) -> np.ndarray:
        """Full ``[true, observed]`` confusion over ``2^n`` outcomes."""
        out = np.array([[1.0]])
        for q in range(n_qubits - 1, -1, -1):
            out = np.kron(out, self.readout.get(q, np.eye(2)))
        return out


def check_density(rho: np.ndarray, tol: float = 1e-10) -> None:
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("density matrix not positive")


def run_noisy(c: Circuit, noise: NoiseModel | None = None, r: int = 1,
              initial: np.ndarray | None = None) -> np.ndarray:
    """Density matrix after running ``c`` from ``|0..0>`` with folded noisy CNOTs."""
    if r < 1 or r % 2 == 0:
        raise ValueError("noise scale r must be an odd positive integer")
    eps = 0.0 if noise is None else noise.eps
    n = c.n_qubits
    dim = 2 ** n
    if initial is None:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
    else:
        initial = np.asarray(initial, dtype=complex)
        rho = np.outer(initial, initial.conj()) if initial.ndim == 1 else initial.copy()
    for g in c.gates:
        if g.name == "measure":
            continue
        u = gate_unitary(g, n)
        reps = r if g.name == "cx" else 1
        for _ in range(reps):
            rho = u @ rho @ u.conj().T
            if g.name == "cx":
                rho = depolarize(rho, g.qubits, eps, n)
    return rho


def probabilities(rho: np.ndarray) -> np.ndarray:
    p = np.clip(np.real(np.diag(rho)), 0.0, None)
    return p / p.sum()


@dataclass
class ShotResult:
    counts: dict
    shots: int
    seed: int | None = None

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the shot total")

    @property
    def n_bits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def frequencies(self, n_bits: int | None = None) -> np.ndarray:
        n = self.n_bits if n_bits is None else n_bits
        f = np.zeros(2 ** n)
        for b, k in self.counts.items():
            f[int(b, 2)] += k
        return f / self.shots

    def to_json(self) -> str:
        return json.dumps({"counts": dict(sorted(self.counts.items())), "shots": self.shots, "seed": self.seed})


def sample_shots(state, shots: int, noise: NoiseModel | None = None, seed=None,
                 n_qubits: int | None = None) -> ShotResult:
    """Multinomial draw of outcome bitstrings (``q_{n-1} .. q_0``).

    ``state`` is a density matrix or a probability vector. Readout errors are
    applied by drawing from the confusion-corrupted distribution, which has
    the same law as flipping each drawn bit independently.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    s = np.asarray(state)
    p = probabilities(s) if s.ndim == 2 else np.clip(np.real(s), 0, None) / np.real(s).sum()
    n = int(round(math.log2(len(p)))) if n_qubits is None else n_qubits
    if noise is not None and noise.readout:
        p = p @ noise.readout_matrix(n)
        p = p / p.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.multinomial(shots, p)
    counts = {format(i, f"0{n}b"): int(k) for i, k in enumerate(draws) if k}
    return ShotResult(counts, shots, seed if isinstance(seed, (int, np.integer)) or seed is None else None)


# ---------------------------------------------------------------------------
# Pauli expectations


def basis_change(label: str) -> Circuit:
    """Gates rotating a Pauli string onto Z: ``X -> h``, ``Y -> sdg, h``."""
    n = len(label)
    c = Circuit(n)
    for pos, ch in enumerate(label):
        q = n - 1 - pos
        if ch == "X":
            c.h(q)
        elif ch == "Y":
            c.sdg(q)
            c.h(q)
        elif ch not in "IZ":
            raise ValueError(f"unknown operator label {label!r}")
    return c


def signature(label: str) -> np.ndarray:
    """Diagonal +-1 pattern of the rotated operator over computational outcomes."""
    n = len(label)
    idx = np.arange(2 ** n)
    sig = np.ones(2 ** n)
    for pos, ch in enumerate(label):
        if ch != "I":
            sig *= 1 - 2 * ((idx >> (n - 1 - pos)) & 1)
    return sig


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def expectation_from_probs(p: np.ndarray, weights: np.ndarray, shots: int | None) -> Estimate:
    m = float(p @ weights)
    if shots is None:
        return Estimate(m, 0.0)
    var = max(float(p @ weights ** 2) - m * m, 0.0)
    return Estimate(m, math.sqrt(var / shots))


def measure_pauli_expectation(c: Circuit, label: str, shots: int | None = 8192,
                              noise: NoiseModel | None = None, r: int = 1, seed=None,
                              calibration=None) -> Estimate:
    """Estimate ``<label>`` on the output of ``c``.

    ``shots=None`` returns the exact expectation of the (noisy) state.
    ``calibration`` applies readout mitigation before estimating.
    """
    from .mitigation import mitigate_counts

    if len(label) != c.n_qubits or any(ch not in "IXYZ" for ch in label):
        raise ValueError(f"unknown operator label {label!r}")
    full = c.without_measurements().copy().extend(basis_change(label))
    rho = run_noisy(full, noise, r)
    sig = signature(label)
    if shots is None:
        p = probabilities(rho)
        if noise is not None and noise.readout:
            p = p @ noise.readout_matrix(c.n_qubits)
        return expectation_from_probs(p, sig, None)
    res = sample_shots(rho, shots, noise, seed, n_qubits=c.n_qubits)
    p = res.frequencies(c.n_qubits) if calibration is None else mitigate_counts(res, calibration).probabilities
    return expectation_from_probs(p, sig, shots)


# ---------------------------------------------------------------------------
# two-qubit dynamics


def two_site_decomposition(params: HamiltonianParams, lt: int = 3) -> PauliDecomposition:
    """Pauli decomposition of the ``k=0, P=+1`` two-site sector at ``lt <= 3``."""
    from .basis import LatticeConfig, sector_basis, truncate_total_energy

    basis = truncate_total_energy(sector_basis(LatticeConfig(2, 1), 0, +1), lt)
    if len(basis) != 4:
        raise ValueError("two-qubit dynamics needs the four-state sector (lt=3)")
    return pauli_decompose(build_hamiltonian(basis, params))


# diagonal observables of the two-qubit sector, index = basis state
TWO_QUBIT_OBSERVABLES = {
    "pair_probability": np.array([0.0, 1.0, 0.0, 1.0]),
    "electric_energy": np.array([0.0, 1.0, 2.0, 3.0]),
    "chiral_condensate": np.array([-0.5, 0.0, 0.5, 0.0]),
    "p_zero_pairs": np.array([1.0, 0.0, 0.0, 0.0]),
}


def evolution_circuit(method: str, decomp: PauliDecomposition, t: float, dt: float = 0.1) -> Circuit:
    if method not in ("cartan", "trotter"):
        raise ValueError(f"unknown method {method!r}")
    if t == 0:
        return Circuit(2)
    if method == "cartan":
        u = expm(-1j * traceless_matrix(decomp) * t)
        return build_propagator_circuit(cartan_decompose_symmetric(u))
    return build_trotter_circuit(decomp, TrotterPlan.for_time(t, dt))


def evolve_and_observe(method: str, params: HamiltonianParams, times, shots: int | None = 8192,
                       noise: NoiseModel | None = None, r: int = 1, dt: float = 0.1,
                       seed: int | None = 0) -> TimeSeries:
    """Simulate the evolution of the empty state and estimate observables.

    With ``shots=None`` exact (noisy) probabilities are used. Each time point
    draws from its own child of ``SeedSequence(seed)``.
    """
    decomp = two_site_decomposition(params)
    times = np.asarray(times, dtype=float)
    children = np.random.SeedSequence(seed).spawn(len(times))
    values = {k: np.zeros(len(times)) for k in TWO_QUBIT_OBSERVABLES}
    errs = {k: np.zeros(len(times)) for k in TWO_QUBIT_OBSERVABLES}
    for i, t in enumerate(times):
        c = evolution_circuit(method, decomp, float(t), dt)
        rho = run_noisy(c, noise, r)
        if shots is None:
            p = probabilities(rho)
            if noise is not None and noise.readout:
                p = p @ noise.readout_matrix(2)
        else:
            p = sample_shots(rho, shots, noise, np.random.default_rng(children[i]), n_qubits=2).frequencies(2)
        for k, w in TWO_QUBIT_OBSERVABLES.items():
            est = expectation_from_probs(p, w, shots)
            values[k][i] = est.value
            errs[k][i] = est.stderr
    meta = {"method": method, "r": r, "eps": 0.0 if noise is None else noise.eps,
            "shots": shots, "seed": seed, "x": params.x, "mu": params.mu}
    if method == "trotter":
        meta["dt"] = dt
    return TimeSeries(times, values, errs, meta)
