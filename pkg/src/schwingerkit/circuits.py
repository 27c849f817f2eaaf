"""Gate-list circuits, symmetric two-qubit Cartan decomposition and builders.

Qubit ``q`` is bit ``q`` of the computational index, so for two qubits the
index is ``2*q1 + q0`` and ``q1`` is the left tensor factor.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .hamiltonian import PauliDecomposition, pauli_matrix

_PI = math.pi


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ])


def rz_matrix(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def ry_matrix(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


_FIXED = {
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
}

GATE_ARITY = {"u3": 1, "h": 1, "s": 1, "sdg": 1, "rz": 1, "ry": 1, "cx": 2, "measure": 1}
GATE_PARAMS = {"u3": 3, "rz": 1, "ry": 1}


@dataclass(frozen=True)
class Gate:
    """One instruction. ``qubits`` is ``(q,)`` or ``(control, target)``;
    measurements carry ``clbit``."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    clbit: int | None = None

    def __post_init__(self):
        if self.name not in GATE_ARITY:
            raise ValueError(f"unknown gate {self.name!r}")
        if len(self.qubits) != GATE_ARITY[self.name]:
            raise ValueError(f"gate {self.name} takes {GATE_ARITY[self.name]} qubit(s)")
        if len(self.params) != GATE_PARAMS.get(self.name, 0):
            raise ValueError(f"gate {self.name} takes {GATE_PARAMS.get(self.name, 0)} parameter(s)")
        if self.name == "cx" and self.qubits[0] == self.qubits[1]:
            raise ValueError("cx control and target must differ")

    def matrix(self) -> np.ndarray:
        """2x2 matrix of a single-qubit gate."""
        if self.name == "u3":
            return u3_matrix(*self.params)
        if self.name == "rz":
            return rz_matrix(self.params[0])
        if self.name == "ry":
            return ry_matrix(self.params[0])
        if self.name in _FIXED:
            return _FIXED[self.name]
        raise ValueError(f"gate {self.name} has no single-qubit matrix")

    def to_text(self) -> str:
        if self.name == "measure":
            return f"measure {self.qubits[0]} {self.clbit}"
        args = [repr(float(p)) for p in self.params] + [str(q) for q in self.qubits]
        return " ".join([self.name] + args)


@dataclass
class Circuit:
    """Ordered gate list over ``n_qubits`` qubits."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    n_clbits: int = 0

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate) -> None:
        if any(q < 0 or q >= self.n_qubits for q in g.qubits):
            raise ValueError(f"qubit index out of range in {g}")
        if g.name == "measure":
            if g.clbit is None or g.clbit < 0:
                raise ValueError("measure needs a classical bit")
            self.n_clbits = max(self.n_clbits, g.clbit + 1)

    def append(self, name: str, *qubits: int, params: Sequence[float] = (), clbit=None) -> "Circuit":
        if self.gates and self.gates[-1].name == "measure" and name != "measure":
            raise ValueError("measurements must be terminal")
        g = Gate(name, tuple(qubits), tuple(float(p) for p in params), clbit)
        self._check(g)
        self.gates.append(g)
        return self

    def u3(self, theta, phi, lam, q):
        return self.append("u3", q, params=(theta, phi, lam))

    def cx(self, c, t):
        return self.append("cx", c, t)

    def h(self, q):
        return self.append("h", q)

    def s(self, q):
        return self.append("s", q)

    def sdg(self, q):
        return self.append("sdg", q)

    def rz(self, lam, q):
        return self.append("rz", q, params=(lam,))

    def ry(self, theta, q):
        return self.append("ry", q, params=(theta,))

    def measure(self, q, c):
        return self.append("measure", q, clbit=c)

    def extend(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        for g in other.gates:
            self._check(g)
            self.gates.append(g)
        return self

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, list(self.gates), self.n_clbits)

    def count(self, name: str) -> int:
        return sum(g.name == name for g in self.gates)

    def without_measurements(self) -> "Circuit":
        return Circuit(self.n_qubits, [g for g in self.gates if g.name != "measure"])

    def to_text(self) -> str:
        return "".join(g.to_text() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str, n_qubits: int) -> "Circuit":
        c = cls(n_qubits)
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            name, args = parts[0], parts[1:]
            if name == "measure":
                c.measure(int(args[0]), int(args[1]))
                continue
            n_par = GATE_PARAMS.get(name, 0)
            c.append(name, *[int(a) for a in args[n_par:]], params=[float(a) for a in args[:n_par]])
        return c


def apply_1q(state: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    """Apply a single-qubit matrix to axis ``q`` of a ``(2,)*n`` tensor (last axes)."""
    axis = n - 1 - q
    t = np.moveaxis(state, axis, 0)
    t = np.tensordot(u, t, axes=([1], [0]))
    return np.moveaxis(t, 0, axis)


def cx_matrix(c: int, t: int, n: int) -> np.ndarray:
    dim = 2 ** n
    m = np.zeros((dim, dim))
    idx = np.arange(dim)
    dst = np.where((idx >> c) & 1, idx ^ (1 << t), idx)
    m[dst, idx] = 1.0
    return m


def gate_unitary(g: Gate, n: int) -> np.ndarray:
    if g.name == "cx":
        return cx_matrix(g.qubits[0], g.qubits[1], n)
    if g.name == "measure":
        raise ValueError("measure has no unitary")
    u = np.array([[1.0 + 0j]])
    for q in range(n - 1, -1, -1):
        u = np.kron(u, g.matrix() if q == g.qubits[0] else np.eye(2))
    return u


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Exact unitary of a measurement-free circuit."""
    if any(g.name == "measure" for g in c.gates):
        raise ValueError("circuit contains measurements")
    u = np.eye(2 ** c.n_qubits, dtype=complex)
    for g in c.gates:
        u = gate_unitary(g, c.n_qubits) @ u
    return u


def phase_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``|Tr(a^dag b)| / d``: 1 when the unitaries agree up to global phase."""
    return float(abs(np.trace(a.conj().T @ b)) / a.shape[0])


# ---------------------------------------------------------------------------
# symmetric Cartan decomposition

MAGIC = np.array([
    [1, 0, 0, 1j],
    [0, 1j, 1, 0],
    [0, 1j, -1, 0],
    [1, 0, 0, -1j],
]) / math.sqrt(2)

_XX, _YY, _ZZ = (pauli_matrix(l) for l in ("XX", "YY", "ZZ"))
# Cartan generators are diagonal in the magic basis
_CARTAN_DIAG = np.real(np.array([np.diag(MAGIC.conj().T @ p @ MAGIC) for p in (_XX, _YY, _ZZ)]))
_MTM = np.real(np.diag(MAGIC.T @ MAGIC))


class CartanError(RuntimeError):
    """Decomposition failed to reach the fidelity target."""


@dataclass(frozen=True)
class CartanAngles:
    """``theta[0:6]`` parameterize the local ``K``; ``theta[6:9]`` the Cartan factor."""

    theta: tuple[float, ...]

    def __post_init__(self):
        if len(self.theta) != 9:
            raise ValueError("nine angles are required")

    @property
    def local(self) -> tuple[float, ...]:
        return self.theta[:6]

    @property
    def cartan(self) -> tuple[float, float, float]:
        return tuple(self.theta[6:9])


def _zyz(a: float, b: float, c: float) -> np.ndarray:
    # Rz(a) Ry(b) Rz(c)
    return rz_matrix(a) @ ry_matrix(b) @ rz_matrix(c)


def local_unitary(t: Sequence[float]) -> np.ndarray:
    """``K = Rz(t3)Ry(t2)Rz(t1) (x) Rz(t6)Ry(t5)Rz(t4)`` (1-based names)."""
    return np.kron(_zyz(t[2], t[1], t[0]), _zyz(t[5], t[4], t[3]))


def cartan_factor(t7: float, t8: float, t9: float) -> np.ndarray:
    return expm(-0.5j * (t7 * _XX + t8 * _YY + t9 * _ZZ))


def cartan_unitary(angles: CartanAngles | Sequence[float]) -> np.ndarray:
    """``U_p = K^T C K``."""
    t = angles.theta if isinstance(angles, CartanAngles) else tuple(angles)
    k = local_unitary(t[:6])
    return k.T @ cartan_factor(*t[6:9]) @ k


def _zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """``(a, b, c)`` with ``u = Rz(a) Ry(b) Rz(c)`` up to a global phase."""
    u = u / np.sqrt(np.linalg.det(u))
    b = 2 * math.atan2(abs(u[1, 0]), abs(u[0, 0]))
    if abs(u[0, 0]) > 1e-12 and abs(u[1, 0]) > 1e-12:
        apc = 2 * np.angle(u[1, 1])
        amc = 2 * np.angle(u[1, 0])
    elif abs(u[1, 0]) <= 1e-12:
        apc, amc = 2 * np.angle(u[1, 1]), 0.0
    else:
        apc, amc = 0.0, 2 * np.angle(u[1, 0])
    return float((apc + amc) / 2), float(b), float((apc - amc) / 2)


def _split_local(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rank-1 factorization of the realigned 4x4 matrix
    r = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    a = math.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = math.sqrt(s[0]) * vh[0].reshape(2, 2)
    return a, b


def _real_orthogonal_diagonalizer(w: np.ndarray) -> np.ndarray:
    """Real orthogonal ``O`` with ``O w O^T`` diagonal for symmetric unitary ``w``."""
    a, b = np.real(w), np.imag(w)
    best, best_err = None, np.inf
    for c in (0.7071067811865476, 1.6180339887498949, -0.4142135623730951, 3.3166247903554, 0.2360679774997897):
        _, q = np.linalg.eigh(a + c * b)
        d = q.T @ w @ q
        err = np.max(np.abs(d - np.diag(np.diag(d))))
        if err < best_err:
            best, best_err = q, err
        if err < 1e-13:
            break
    if np.linalg.det(best) < 0:
        best = best.copy()
        best[:, 0] = -best[:, 0]
    return best.T


def cartan_decompose_symmetric(u: np.ndarray, target: float = 1 - 1e-9) -> CartanAngles:
    """Angles with ``cartan_unitary(angles) = u`` up to a global phase.

    Uses the magic basis, where local gates are real orthogonal and the
    Cartan generators are diagonal: ``M^T u M = O^T (J D) O`` with real
    orthogonal ``O`` and ``J = M^T M``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    if np.max(np.abs(u - u.T)) > 1e-8:
        raise ValueError("input is not symmetric")
    if np.max(np.abs(u.conj().T @ u - np.eye(4))) > 1e-8:
        raise ValueError("input is not unitary")
    if abs(np.linalg.det(u) - 1) > 1e-8:
        raise ValueError("input is not special unitary (det != 1)")
    w = MAGIC.T @ u @ MAGIC
    o = _real_orthogonal_diagonalizer(w)
    delta = _MTM * np.diag(o @ w @ o.T)
    phases = np.angle(delta)
    # phases = -(t7 x + t8 y + t9 z)/2 + phi0 with orthogonal +-1 patterns
    t789 = -2 * (_CARTAN_DIAG @ phases) / 4
    kmat = MAGIC @ o @ MAGIC.conj().T
    a, b = _split_local(kmat)
    a3, a2, a1 = _zyz_angles(a)
    a6, a5, a4 = _zyz_angles(b)
    angles = CartanAngles((a1, a2, a3, a4, a5, a6, *map(float, t789)))
    fid = phase_fidelity(cartan_unitary(angles), u)
    if fid < target:
        raise CartanError(f"reconstruction fidelity {fid:.12f} below target {target}")
    return angles


def cartan_class(angles: CartanAngles) -> tuple[float, float, float]:
    """Canonical Weyl-chamber representative of the Cartan angles.

    Each angle is reduced modulo ``pi`` into ``(-pi/2, pi/2]``; absolute
    values are sorted in descending order and a sign is kept on the last
    one only, since flipping two signs at once is a local equivalence.
    """
    red = [((a + _PI / 2) % _PI) - _PI / 2 for a in angles.cartan]
    sign = np.prod(np.sign([r if abs(r) > 1e-12 else 1.0 for r in red]))
    mags = sorted((abs(r) for r in red), reverse=True)
    if abs(mags[0] - _PI / 2) < 1e-12:
        sign = 1.0
    return (mags[0], mags[1], float(sign) * mags[2])


# ---------------------------------------------------------------------------
# circuit builders


def build_cartan_circuit(t7: float, t8: float, t9: float, variant: str = "3cnot") -> Circuit:
    """Circuit for ``exp(-i (t7 XX + t8 YY + t9 ZZ) / 2)``."""
    c = Circuit(2)
    if variant == "3cnot":
        c.cx(0, 1)
        c.u3(t7, -_PI / 2, _PI / 2, 0)
        c.h(0)
        c.u3(0, 0, t9, 1)
        c.cx(0, 1)
        c.s(0)
        c.h(0)
        c.u3(0, 0, -t8, 1)
        c.cx(0, 1)
        c.u3(-_PI / 2, -_PI / 2, _PI / 2, 0)
        c.u3(_PI / 2, -_PI / 2, _PI / 2, 1)
    elif variant == "6cnot":
        # ZZ, then XX and YY through basis changes on both qubits
        _pp_rotation(c, t9, "Z")
        _pp_rotation(c, t7, "X")
        _pp_rotation(c, t8, "Y")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return c


def _to_z(c: Circuit, q: int, axis: str, inverse: bool = False) -> None:
    # basis change sending the given Pauli axis to Z
    if axis == "X":
        c.h(q)
    elif axis == "Y":
        c.u3(_PI / 2, -_PI / 2, _PI / 2, q) if not inverse else c.u3(-_PI / 2, -_PI / 2, _PI / 2, q)


def _pp_rotation(c: Circuit, theta: float, axis: str) -> None:
    """``exp(-i theta/2 P(x)P)`` with two CNOTs."""
    for q in (0, 1):
        _to_z(c, q, axis)
    c.cx(1, 0)
    c.rz(theta, 0)
    c.cx(1, 0)
    for q in (0, 1):
        _to_z(c, q, axis, inverse=True)


def build_propagator_circuit(angles: CartanAngles, variant: str = "3cnot",
                             drop_leading_z: bool = True) -> Circuit:
    """Gate sequence for ``U_p = K^T C K``.

    With ``drop_leading_z`` the first ``Rz`` on each qubit is omitted; it
    only contributes phases on the computational input ``|00>``.
    """
    t1, t2, t3, t4, t5, t6, t7, t8, t9 = angles.theta
    c = Circuit(2)
    if not drop_leading_z:
        c.rz(t1, 1)
        c.rz(t4, 0)
    c.u3(t2, 0, 0, 1)
    c.u3(0, 0, t3, 1)
    c.u3(t5, 0, 0, 0)
    c.u3(0, 0, t6, 0)
    c.extend(build_cartan_circuit(t7, t8, t9, variant))
    c.u3(0, 0, t6, 0)
    c.u3(-t5, 0, 0, 0)
    c.u3(0, 0, t4, 0)
    c.u3(0, 0, t3, 1)
    c.u3(-t2, 0, 0, 1)
    c.u3(0, 0, t1, 1)
    return c


# Trotter terms of the truncated two-qubit Hamiltonian
TROTTER_TERMS = ("XX", "YY", "ZZ", "IX", "IZ", "ZI", "ZX")


@dataclass(frozen=True)
class TrotterPlan:
    """Term ordering (labels), step size and step count."""

    order: tuple[str, ...] = TROTTER_TERMS
    dt: float = 0.1
    steps: int = 1

    def __post_init__(self):
        if sorted(self.order) != sorted(TROTTER_TERMS):
            raise ValueError("order must be a permutation of the seven Trotter terms")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def total_time(self) -> float:
        return self.dt * self.steps

    @classmethod
    def for_time(cls, t: float, dt: float, order=TROTTER_TERMS) -> "TrotterPlan":
        n = max(1, int(round(t / dt)))
        return cls(tuple(order), t / n, n)


def _term_gates(c: Circuit, label: str, angle: float) -> None:
    # exp(-i angle/2 P) for one Pauli string
    if label == "IX":
        c.u3(angle, -_PI / 2, _PI / 2, 0)
    elif label == "IZ":
        c.rz(angle, 0)
    elif label == "ZI":
        c.rz(angle, 1)
    elif label == "ZX":
        c.h(0)
        c.cx(1, 0)
        c.rz(angle, 0)
        c.cx(1, 0)
        c.h(0)
    elif label in ("XX", "YY", "ZZ"):
        _pp_rotation(c, angle, label[0])
    else:
        raise ValueError(f"no gate rule for term {label!r}")


def trotter_coefficients(decomp: PauliDecomposition) -> dict:
    coeffs = dict(decomp.nonzero(1e-14))
    extra = set(coeffs) - set(TROTTER_TERMS)
    if extra:
        raise ValueError(f"decomposition has terms outside the Trotter set: {sorted(extra)}")
    return {l: coeffs.get(l, 0.0) for l in TROTTER_TERMS}


def build_trotter_step(decomp: PauliDecomposition, dt: float, order=TROTTER_TERMS,
                       fuse_cartan: bool = True) -> Circuit:
    """One first-order step ``prod_j exp(-i c_j O_j dt)`` in ``order``.

    When the three Cartan terms are adjacent and ``fuse_cartan`` is set they
    are emitted as one 3-CNOT block.
    """
    coeffs = trotter_coefficients(decomp)
    c = Circuit(2)
    order = tuple(order)
    i = 0
    while i < len(order):
        lab = order[i]
        if fuse_cartan and set(order[i:i + 3]) == {"XX", "YY", "ZZ"}:
            c.extend(build_cartan_circuit(2 * coeffs["XX"] * dt, 2 * coeffs["YY"] * dt, 2 * coeffs["ZZ"] * dt))
            i += 3
            continue
        _term_gates(c, lab, 2 * coeffs[lab] * dt)
        i += 1
    return c


def trotter_step_unitary(decomp: PauliDecomposition, dt: float, order=TROTTER_TERMS) -> np.ndarray:
    """Dense product of term exponentials (matrix oracle for the circuits)."""
    coeffs = trotter_coefficients(decomp)
    u = np.eye(4, dtype=complex)
    for lab in order:
        u = expm(-1j * coeffs[lab] * dt * pauli_matrix(lab)) @ u
    return u


def build_trotter_circuit(decomp: PauliDecomposition, plan: TrotterPlan) -> Circuit:
    step = build_trotter_step(decomp, plan.dt, plan.order)
    c = Circuit(2)
    for _ in range(plan.steps):
        c.extend(step)
    return c


def traceless_matrix(decomp: PauliDecomposition) -> np.ndarray:
    return decomp.reconstruct() - decomp.shift * np.eye(2 ** len(decomp.labels[0]))


def trotter_error(decomp: PauliDecomposition, dt: float, t: float, order=TROTTER_TERMS) -> float:
    """Spectral norm of ``exp(-i H t) - U_step(dt)^N`` with ``N = t/dt``."""
    n = max(1, int(round(t / dt)))
    step = trotter_step_unitary(decomp, t / n, order)
    exact = expm(-1j * traceless_matrix(decomp) * t)
    return float(np.linalg.norm(exact - np.linalg.matrix_power(step, n), 2))


@dataclass
class OrderingScan:
    orders: list
    errors: np.ndarray

    @property
    def summary(self) -> dict:
        e = self.errors
        return {"min": float(e.min()), "max": float(e.max()), "median": float(np.median(e))}


def trotter_ordering_scan(decomp: PauliDecomposition, dt: float, t: float,
                          max_orders: int = 5040) -> OrderingScan:
    """Trotter error for every ordering of the seven terms."""
    orders = list(itertools.permutations(TROTTER_TERMS))
    if len(orders) > max_orders:
        raise ValueError(f"{len(orders)} orderings exceed the limit {max_orders}")
    coeffs = trotter_coefficients(decomp)
    n = max(1, int(round(t / dt)))
    h = t / n
    exps = {l: expm(-1j * coeffs[l] * h * pauli_matrix(l)) for l in TROTTER_TERMS}
    exact = expm(-1j * traceless_matrix(decomp) * t)
    errs = np.empty(len(orders))
    for i, order in enumerate(orders):
        u = np.eye(4, dtype=complex)
        for lab in order:
            u = exps[lab] @ u
        errs[i] = np.linalg.norm(exact - np.linalg.matrix_power(u, n), 2)
    return OrderingScan(orders, errs)


def build_vqe_ansatz(theta0: float, theta1: float, theta2: float) -> Circuit:
    """Two-qubit real ansatz: ``ry(t1) q1, ry(t0) q0, cx, ry(t0) q0, cx, ry(t2) q0``.

    From ``|00>`` it prepares
    ``(c1 cos(a/2), c1 sin(a/2), s1 cos(b/2), s1 sin(b/2))`` with
    ``c1, s1 = cos(t1/2), sin(t1/2)``, ``a = 2 t0 + t2`` and ``b = t2``.
    """
    c = Circuit(2)
    c.ry(theta1, 1)
    c.ry(theta0, 0)
    c.cx(1, 0)
    c.ry(theta0, 0)
    c.cx(1, 0)
    c.ry(theta2, 0)
    return c


def ansatz_angles_for(vec: Sequence[float]) -> tuple[float, float, float]:
    """Circuit angles ``(t0, t1, t2)`` preparing a real 4-vector (up to sign)."""
    v = np.asarray(vec, dtype=float)
    if v.shape != (4,):
        raise ValueError("expected a real 4-vector")
    v = v / np.linalg.norm(v)
    t1 = 2 * math.atan2(math.hypot(v[2], v[3]), math.hypot(v[0], v[1]))
    alpha = 2 * math.atan2(v[1], v[0])
    beta = 2 * math.atan2(v[3], v[2])
    return (alpha - beta) / 2, t1, beta
