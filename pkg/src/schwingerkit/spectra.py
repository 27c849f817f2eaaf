"""Exact diagonalization, exact time evolution and cutoff studies."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import LatticeConfig, ProjectedBasis, sector_basis, truncate_total_energy
from .hamiltonian import (
    HamiltonianParams,
    OperatorMatrix,
    build_hamiltonian,
    build_observable,
    format_float,
)

logger = logging.getLogger(__name__)

DENSE_THRESHOLD = 2000
DEFAULT_TIMES = np.round(np.arange(0.0, 10.0 + 1e-9, 0.1), 10)


class EigensolverError(RuntimeError):
    """Iterative eigensolver failed to converge."""


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # first entry above noise level made positive
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if len(nz) and col[nz[0]] < 0:
            out[:, j] = -col
    return out


@dataclass
class SpectrumResult:
    """Ascending eigenvalues and orthonormal column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: ProjectedBasis | None = None

    def shifted(self) -> np.ndarray:
        return self.eigenvalues - self.eigenvalues[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, e in enumerate(self.eigenvalues):
            w.writerow([i, format_float(e)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"eigenvalues": [float(e) for e in self.eigenvalues]})


def eigensolve(matrix, n_eig: int | None = None, dense_threshold: int = DENSE_THRESHOLD,
               tol: float = 1e-12, maxiter: int | None = None) -> SpectrumResult:
    """Eigen-decompose a real symmetric operator.

    Dense LAPACK ``eigh`` is used up to ``dense_threshold``; above it the
    lowest ``n_eig`` pairs come from implicitly restarted Lanczos (ARPACK).

    Parameters
    ----------
    matrix : OperatorMatrix, ndarray or sparse matrix
    n_eig : int, optional
        Number of lowest eigenpairs wanted; all when ``None`` (dense path).
    """
    basis = matrix.basis if isinstance(matrix, OperatorMatrix) else None
    m = matrix.matrix if isinstance(matrix, OperatorMatrix) else matrix
    dim = m.shape[0]
    if dim <= dense_threshold or (n_eig is not None and n_eig >= dim - 1):
        a = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
        vals, vecs = np.linalg.eigh(a)
        if n_eig is not None:
            vals, vecs = vals[:n_eig], vecs[:, :n_eig]
    else:
        k = 6 if n_eig is None else n_eig
        v0 = np.ones(dim) / math.sqrt(dim)
        try:
            vals, vecs = spla.eigsh(sp.csr_matrix(m), k=k, which="SA", tol=tol, v0=v0, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} eigenpairs "
                f"after maxiter={maxiter}"
            ) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return SpectrumResult(vals, _fix_signs(vecs), basis)


# ---------------------------------------------------------------------------
# time evolution


@dataclass
class TimeSeries:
    """Observable values (and optional standard errors) on a time grid."""

    times: np.ndarray
    values: dict
    stderr: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) < 0):
            raise ValueError("times must be non-decreasing")

    def to_csv(self, r=None) -> str:
        """Long-form table with columns ``t, r, observable, value, stderr``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "r", "observable", "value", "stderr"])
        rlab = self.meta.get("r", "") if r is None else r
        for name in self.values:
            vals = self.values[name]
            errs = self.stderr.get(name)
            for i, t in enumerate(self.times):
                e = "" if errs is None else format_float(errs[i])
                w.writerow([format_float(t), rlab, name, format_float(vals[i]), e])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "times": self.times.tolist(),
            "values": {k: np.asarray(v).tolist() for k, v in self.values.items()},
            "stderr": {k: np.asarray(v).tolist() for k, v in self.stderr.items()},
            "meta": self.meta,
        }, sort_keys=True)


def evolve_states(h: np.ndarray, initial: np.ndarray, times) -> np.ndarray:
    """Rows ``psi(t) = V exp(-i E t) V^T psi(0)`` for each time."""
    vals, vecs = np.linalg.eigh(np.asarray(h, dtype=float))
    c = vecs.T @ np.asarray(initial, dtype=complex)
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.outer(times, vals))
    out = (phases * c[None, :]) @ vecs.T
    # skip the eigenbasis round trip at t = 0
    out[times == 0] = np.asarray(initial, dtype=complex)
    return out


def evolve_exact(h, initial, times=DEFAULT_TIMES, observables: dict | None = None) -> TimeSeries:
    """Exact evolution with probabilities and diagonal-observable expectations.

    Parameters
    ----------
    h : OperatorMatrix or ndarray
    initial : array_like
        Normalized initial state in the basis of ``h``.
    observables : dict, optional
        Name to diagonal array (or square matrix); when ``h`` carries a basis
        the default set is pair probability, electric energy and condensate.
    """
    basis = h.basis if isinstance(h, OperatorMatrix) else None
    hm = h.dense() if isinstance(h, OperatorMatrix) else np.asarray(h)
    psi0 = np.asarray(initial, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    times = np.asarray(times, dtype=float)
    psi = evolve_states(hm, psi0, times)
    probs = np.abs(psi) ** 2
    values = {f"p{i}": probs[:, i] for i in range(probs.shape[1])}
    if observables is None and basis is not None:
        observables = {
            k: np.diag(build_observable(k, basis).operator.dense())
            for k in ("pair_probability", "electric_energy", "chiral_condensate")
        }
    for name, op in (observables or {}).items():
        op = np.asarray(op)
        if op.ndim == 1:
            values[name] = probs @ op
        else:
            values[name] = np.real(np.einsum("ti,ij,tj->t", psi.conj(), op, psi))
    values["energy"] = np.real(np.einsum("ti,ij,tj->t", psi.conj(), hm, psi))
    return TimeSeries(times, values, meta={"method": "exact"})


# ---------------------------------------------------------------------------
# vacuum properties


@dataclass(frozen=True)
class VacuumProperties:
    n_spatial: int
    energy: float
    energy_density: float
    condensate: float
    electric_energy: float

    def as_tuple(self) -> tuple:
        return (self.energy, self.energy_density, self.condensate, self.electric_energy)


def default_link_cutoff(lt: int) -> int:
    """Largest per-link flux compatible with a total cutoff: ``floor(sqrt(lt))``."""
    return math.isqrt(int(lt))


def vacuum_properties(n_spatial: int, x: float, mu: float, lt: int = 10,
                      link_cutoff: int | None = None) -> VacuumProperties:
    """Ground state of the ``k=0, P=+1`` sector and its properties.

    The energy density is per spatial site and the electric energy is the
    expectation of ``sum(l**2)`` per fermion site (per link).
    """
    lam = default_link_cutoff(lt) if link_cutoff is None else link_cutoff
    basis = sector_basis(LatticeConfig(n_spatial, lam, lt), 0, +1)
    h = build_hamiltonian(basis, HamiltonianParams(x, mu), sparse=True)
    res = eigensolve(h, n_eig=1)
    v = res.eigenvectors[:, 0]
    cond = np.diag(build_observable("chiral_condensate", basis).operator.dense())
    e2 = basis.energies.astype(float)
    e0 = float(res.eigenvalues[0])
    w = v * v
    return VacuumProperties(
        n_spatial, e0, e0 / n_spatial, float(w @ cond), float(w @ e2) / (2 * n_spatial)
    )


# ---------------------------------------------------------------------------
# cutoff convergence


@dataclass
class ConvergenceStudy:
    """Spectra per cutoff and pair-probability residuals against a reference."""

    spectra: dict
    residuals: TimeSeries | None
    reference: str

    def rows(self):
        for key, vals in self.spectra.items():
            yield key, vals


def two_site_sector(P: int = +1, lt: int | None = None, link_cutoff: int = 1) -> ProjectedBasis:
    basis = sector_basis(LatticeConfig(2, link_cutoff), 0, P)
    return basis if lt is None else truncate_total_energy(basis, lt)


def convergence_study(x: float = 0.6, mu: float = 0.1, P: int = +1, lt_values=(1, 2, 3, 4),
                      reference_link_cutoff: int = 10, times=DEFAULT_TIMES,
                      n_spatial: int = 2) -> ConvergenceStudy:
    """Spectra of the ``k=0`` sector under total-energy truncation.

    Rows are keyed by ``"lt=<n>"`` (with ``Lambda = 1``) and ``"exact"``
    (``Lambda = reference_link_cutoff``, no total cutoff). Residuals are the
    pair-probability curves from the empty state minus the reference curve;
    they exist only for the even sector, which contains the empty state.
    """
    params = HamiltonianParams(x, mu)
    spectra = {}
    curves = {}
    ref_basis = sector_basis(LatticeConfig(n_spatial, reference_link_cutoff), 0, P)
    bases = {"exact": ref_basis}
    for lt in lt_values:
        b = truncate_total_energy(sector_basis(LatticeConfig(n_spatial, 1), 0, P), lt)
        if not b.is_empty:
            bases[f"lt={lt}"] = b
    for key, b in bases.items():
        h = build_hamiltonian(b, params)
        spectra[key] = eigensolve(h).eigenvalues
        if P == +1:
            psi0 = np.zeros(len(b))
            psi0[0] = 1.0
            ts = evolve_exact(h, psi0, times)
            curves[key] = ts.values["pair_probability"]
    residuals = None
    if curves:
        ref = curves["exact"]
        residuals = TimeSeries(
            np.asarray(times, dtype=float),
            {k: v - ref for k, v in curves.items() if k != "exact"},
            meta={"observable": "pair_probability", "reference": "exact"},
        )
    return ConvergenceStudy(spectra, residuals, "exact")
