"""Variational ground and excited states of the small two-site sectors.

Trial states are real rotation chains ``R_{d-1,d}(t_{d-1}) ... R_12(t_1) e_1``
which give ``(c1, s1 c2, s1 s2 c3, s1 s2 s3)`` in four dimensions. Each chain
vector is compiled into the two-qubit ``ry``/``cx`` ansatz (or one ``ry``
for a single qubit) and its energy is assembled from Pauli expectations.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import LatticeConfig, sector_basis, truncate_total_energy
from .circuits import Circuit, ansatz_angles_for, build_vqe_ansatz
from .hamiltonian import (
    HamiltonianParams,
    PauliDecomposition,
    build_hamiltonian,
    build_observable,
    pad_to_qubits,
    pauli_decompose,
)
from .mitigation import ZnePointSet, zne_extrapolate
from .noise import Estimate, NoiseModel, measure_pauli_expectation
from .optimize import OptimizerConfig, OptimizeTrace, optimize
from .spectra import eigensolve


def plane_rotation(dim: int, i: int, theta: float) -> np.ndarray:
    r = np.eye(dim)
    c, s = math.cos(theta), math.sin(theta)
    r[i, i], r[i, i + 1], r[i + 1, i], r[i + 1, i + 1] = c, -s, s, c
    return r


def rotation_frame(angles, dim: int | None = None) -> np.ndarray:
    """Orthogonal ``R_{d-1,d}(t_{d-1}) ... R_12(t_1)``; column 0 is the chain vector."""
    angles = list(angles)
    dim = len(angles) + 1 if dim is None else dim
    r = np.eye(dim)
    for i, t in enumerate(angles):
        r = plane_rotation(dim, i, t) @ r
    return r


def rotation_chain(angles) -> np.ndarray:
    return rotation_frame(angles)[:, 0]


def chain_embedding(angles: np.ndarray) -> np.ndarray:
    """Rows of ``vec(v v^T)`` (upper triangle) for chain vectors ``v``.

    The energy is linear in these features and chains that differ by the
    overall sign share them.
    """
    angles = np.atleast_2d(angles)
    d = angles.shape[1] + 1
    iu = np.triu_indices(d)
    out = np.empty((len(angles), len(iu[0])))
    for i, a in enumerate(angles):
        v = rotation_chain(a)
        out[i] = np.outer(v, v)[iu]
    return out


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _chain_from(w: np.ndarray, signs) -> list[float]:
    """Angles for unit ``w`` given the sign of every intermediate sine."""
    angles = []
    d = len(w)
    for k in range(d - 1):
        tail = float(np.linalg.norm(w[k + 1:]))
        if k == d - 2:
            angles.append(math.atan2(w[k + 1], w[k]))
            break
        t = math.atan2(signs[k] * tail, w[k])
        angles.append(t)
        if tail < 1e-14:
            angles += [0.0] * (d - 2 - k)
            break
        w = w.copy()
        w[k + 1:] /= math.sin(t)
    return angles


def chain_angles(vec) -> tuple[float, ...]:
    """Smallest-norm angles whose chain equals ``vec`` up to overall sign.

    The sign of each intermediate sine is a free gauge choice, as is the
    overall sign of an eigenvector; all combinations are tried and the angle
    vector of smallest Euclidean norm is returned.
    """
    v = np.asarray(vec, dtype=float)
    v = v / np.linalg.norm(v)
    d = len(v)
    if d == 1:
        return ()
    best = None
    for sgn in (1.0, -1.0):
        for signs in itertools.product((1.0, -1.0), repeat=d - 2):
            angles = [_wrap(a) for a in _chain_from(sgn * v, signs)]
            if np.max(np.abs(rotation_chain(angles) - sgn * v)) > 1e-9:
                continue
            n = float(np.linalg.norm(angles))
            if best is None or n < best[0] - 1e-12:
                best = (n, tuple(angles))
    if best is None:
        raise RuntimeError("no rotation chain reproduces the vector")
    return best[1]


def exact_minimize_angles(h) -> tuple[float, ...]:
    """Chain angles of the exact lowest eigenvector of a small symmetric matrix."""
    m = h.dense() if hasattr(h, "dense") else np.asarray(h, dtype=float)
    res = eigensolve(m)
    return chain_angles(res.eigenvectors[:, 0])


# ---------------------------------------------------------------------------
# sector problem


@dataclass
class VqeProblem:
    """A sector Hamiltonian padded to qubits, with its Pauli expansions."""

    matrix: np.ndarray
    hamiltonian: PauliDecomposition
    condensate: PauliDecomposition
    n_qubits: int
    lt: int | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def two_site(cls, params: HamiltonianParams, lt: int = 3, traceless: bool = False) -> "VqeProblem":
        basis = truncate_total_energy(sector_basis(LatticeConfig(2, 1), 0, +1), lt)
        h = build_hamiltonian(basis, params).dense()
        if traceless:
            h = h - np.trace(h) / len(h) * np.eye(len(h))
        cond = build_observable("chiral_condensate", basis).operator.dense()
        return cls.from_matrices(h, cond, lt)

    @classmethod
    def from_matrices(cls, h: np.ndarray, cond: np.ndarray | None = None, lt=None) -> "VqeProblem":
        h = np.asarray(h, dtype=float)
        cond = np.zeros_like(h) if cond is None else np.asarray(cond, dtype=float)
        hp, cp = pad_to_qubits(h), pad_to_qubits(cond)
        n = int(round(math.log2(hp.shape[0])))
        return cls(h, pauli_decompose(hp), pauli_decompose(cp), n, lt)

    def state_circuit(self, vec: np.ndarray) -> Circuit:
        v = np.zeros(2 ** self.n_qubits)
        v[: len(vec)] = vec
        if self.n_qubits == 1:
            return Circuit(1).ry(2 * math.atan2(v[1], v[0]), 0)
        if self.n_qubits == 2:
            return build_vqe_ansatz(*ansatz_angles_for(v))
        raise ValueError("only one- and two-qubit sectors are supported")


def _measure(problem: VqeProblem, decomp: PauliDecomposition, circuit: Circuit, shots, noise, r, ss):
    terms = decomp.nonzero(1e-14)
    if not terms:
        return Estimate(decomp.shift, 0.0), {}
    children = ss.spawn(len(terms))
    est = {}
    for (lab, _), child in zip(terms, children):
        est[lab] = measure_pauli_expectation(circuit, lab, shots, noise, r, np.random.default_rng(child))
    value = decomp.shift + sum(c * est[l].value for l, c in terms)
    err = math.sqrt(sum((c * est[l].stderr) ** 2 for l, c in terms))
    return Estimate(value, err), est


@dataclass
class SimConfig:
    shots: int | None = None
    eps: float = 0.0
    r: int = 1
    seed: int = 0
    zne_r: tuple[int, ...] | None = None
    zne_order: int = 2
    extrapolate_inside: bool = False

    def noise(self) -> NoiseModel | None:
        return NoiseModel(self.eps) if self.eps > 0 else None

    def as_dict(self) -> dict:
        return {"shots": self.shots, "eps": self.eps, "r": self.r, "seed": self.seed,
                "zne_r": None if self.zne_r is None else list(self.zne_r),
                "zne_order": self.zne_order, "extrapolate_inside": self.extrapolate_inside}


@dataclass
class VqeResult:
    angles: tuple[float, ...]
    vector: np.ndarray
    energy: Estimate
    condensate: Estimate
    expectations: dict
    trace: OptimizeTrace
    frame: np.ndarray
    level: int = 0
    zne: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "level": self.level,
            "angles": [float(a) for a in self.angles],
            "energy": float(self.energy.value),
            "stderr": float(self.energy.stderr),
            "condensate": {"value": float(self.condensate.value), "stderr": float(self.condensate.stderr)},
            "expectations": {k: {"value": float(e.value), "stderr": float(e.stderr)}
                             for k, e in sorted(self.expectations.items())},
            "optimizer_trace": self.trace.as_dict(),
            "config": self.config,
        }
        if self.zne:
            out["zne"] = self.zne
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _evaluate(problem, complement, angles, sim: SimConfig, ss, r=None):
    vec = complement @ rotation_chain(angles) if len(angles) else complement[:, 0]
    circ = problem.state_circuit(vec)
    return _measure(problem, problem.hamiltonian, circ, sim.shots, sim.noise(), sim.r if r is None else r, ss)


def _extrapolated_energy(problem, complement, angles, sim: SimConfig, ss):
    children = ss.spawn(len(sim.zne_r))
    pts = [_evaluate(problem, complement, angles, sim, c, r)[0] for r, c in zip(sim.zne_r, children)]
    fit = zne_extrapolate(ZnePointSet(sim.zne_r, [p.value for p in pts],
                                      [p.stderr for p in pts] if sim.shots else None), sim.zne_order)
    return Estimate(fit.intercept, fit.stderr)


def _search(problem: VqeProblem, complement: np.ndarray, sim: SimConfig,
            opt: OptimizerConfig, level: int) -> VqeResult:
    m = complement.shape[1]
    n_ang = m - 1
    root = np.random.SeedSequence([sim.seed, level])
    opt_ss, final_ss = root.spawn(2)
    counter = itertools.count()

    def objective(theta):
        ss = np.random.SeedSequence([sim.seed, level, 1, next(counter)])
        if sim.extrapolate_inside and sim.zne_r:
            e = _extrapolated_energy(problem, complement, theta, sim, ss)
        else:
            e = _evaluate(problem, complement, theta, sim, ss)[0]
        return e.value, e.stderr

    if n_ang == 0:
        theta = np.zeros(0)
        trace = OptimizeTrace()
    else:
        res = optimize(objective, [(-math.pi, math.pi)] * n_ang, opt)
        theta, trace = res.x, res.trace
    # report the smallest-norm gauge reaching the same state (up to sign)
    angles = chain_angles(rotation_chain(theta)) if n_ang else ()
    vec = complement @ rotation_chain(angles) if n_ang else complement[:, 0]
    circ = problem.state_circuit(vec)
    e_ss, c_ss, z_ss = final_ss.spawn(3)
    energy, expect = _measure(problem, problem.hamiltonian, circ, sim.shots, sim.noise(), sim.r, e_ss)
    cond, cexp = _measure(problem, problem.condensate, circ, sim.shots, sim.noise(), sim.r, c_ss)
    expect = {**expect, **{k: v for k, v in cexp.items() if k not in expect}}
    frame_local = rotation_frame(angles, m) if n_ang else np.eye(m)
    frame = complement @ frame_local
    zne = {}
    if sim.zne_r:
        zne = _zne_report(problem, circ, sim, z_ss)
        energy = Estimate(zne["energy"]["intercept"], zne["energy"]["stderr"])
        cond = Estimate(zne["condensate"]["intercept"], zne["condensate"]["stderr"])
    return VqeResult(angles, vec, energy, cond, expect, trace, frame, level, zne,
                     {"sim": sim.as_dict(), "optimizer": opt.as_dict(), "lt": problem.lt})


def _zne_report(problem: VqeProblem, circ: Circuit, sim: SimConfig, ss) -> dict:
    rs = list(sim.zne_r)
    children = ss.spawn(len(rs))
    per_r = []
    for r, child in zip(rs, children):
        a, b = child.spawn(2)
        e, ex = _measure(problem, problem.hamiltonian, circ, sim.shots, sim.noise(), r, a)
        c, cx = _measure(problem, problem.condensate, circ, sim.shots, sim.noise(), r, b)
        per_r.append((e, c, {**ex, **cx}))
    report = {"r": rs}
    for name, idx in (("energy", 0), ("condensate", 1)):
        vals = [p[idx].value for p in per_r]
        errs = [p[idx].stderr for p in per_r] if sim.shots else None
        fit = zne_extrapolate(ZnePointSet(rs, vals, errs), sim.zne_order)
        report[name] = {"values": vals, "stderr": errs, **fit.to_dict()}
    ops = {}
    for lab in per_r[0][2]:
        vals = [p[2][lab].value for p in per_r]
        errs = [p[2][lab].stderr for p in per_r] if sim.shots else None
        fit = zne_extrapolate(ZnePointSet(rs, vals, errs), sim.zne_order)
        ops[lab] = {"values": vals, "intercept": fit.intercept, "stderr": fit.stderr}
    report["operators"] = ops
    return report


def default_optimizer(seed: int = 0, **kw) -> OptimizerConfig:
    """GP optimizer whose kernel sees ``v v^T`` rather than raw angles."""
    return OptimizerConfig(seed=seed, embedding=chain_embedding, **kw)


def vqe_ground_state(problem: VqeProblem, sim: SimConfig | None = None,
                     optimizer: OptimizerConfig | None = None) -> VqeResult:
    """Minimize the measured energy over the full rotation chain."""
    sim = sim or SimConfig()
    opt = optimizer or default_optimizer(sim.seed)
    return _search(problem, np.eye(problem.dim), sim, opt, 0)


def vqe_excited_state(problem: VqeProblem, previous: VqeResult, sim: SimConfig | None = None,
                      optimizer: OptimizerConfig | None = None) -> VqeResult:
    """Next state up, searched in the complement of the states found so far.

    ``previous.frame`` columns ``0..level`` span the states already found;
    the remaining columns are orthonormal and carry the shorter chain.
    """
    sim = sim or SimConfig()
    opt = optimizer or default_optimizer(sim.seed)
    level = previous.level + 1
    if level >= problem.dim:
        raise ValueError("no states left in the complement")
    complement = previous.frame[:, previous.level + 1:]
    res = _search(problem, complement, sim, opt, level)
    # keep the already-found columns in the returned frame
    res.frame = np.hstack([previous.frame[:, : previous.level + 1], res.frame])
    return res


def vqe_spectrum(problem: VqeProblem, sim: SimConfig | None = None,
                 optimizer: OptimizerConfig | None = None) -> list[VqeResult]:
    out = [vqe_ground_state(problem, sim, optimizer)]
    while out[-1].level + 1 < problem.dim:
        out.append(vqe_excited_state(problem, out[-1], sim, optimizer))
    return out
