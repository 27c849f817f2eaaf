"""Readout-error mitigation and zero-noise extrapolation in the CNOT fold ``r``."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .noise import NoiseModel, ShotResult, sample_shots

logger = logging.getLogger(__name__)

# one-sigma coverage of a normal distribution
_ONE_SIGMA = stats.norm.cdf(1.0) - stats.norm.cdf(-1.0)


@dataclass
class CalibrationMatrix:
    """Column-stochastic ``A[observed, true]`` over ``2^m`` outcomes."""

    matrix: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("calibration matrix must be square")
        if np.any(a < -1e-12) or np.any(a > 1 + 1e-12):
            raise ValueError("calibration entries must lie in [0, 1]")
        if np.any(np.abs(a.sum(axis=0) - 1) > 1e-9):
            raise ValueError("calibration columns must sum to 1")
        self.matrix = a

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.matrix.shape[0])))


class SingularCalibration(ValueError):
    pass


def readout_calibrate(source, n_qubits: int, shots: int | None = None, seed=None,
                      min_shots: int = 100, cond_limit: float = 1e8) -> CalibrationMatrix:
    """Calibration matrix from a noise model or measured preparations.

    Parameters
    ----------
    source : NoiseModel or sequence of ShotResult
        A noise model gives the exact matrix when ``shots`` is ``None`` and a
        sampled one otherwise (each computational state prepared and read
        ``shots`` times). A sequence holds one result per prepared state.
    """
    dim = 2 ** n_qubits
    if isinstance(source, NoiseModel):
        if shots is None:
            a = source.readout_matrix(n_qubits).T
        else:
            if shots < min_shots:
                raise ValueError(f"calibration needs at least {min_shots} shots per state")
            children = np.random.SeedSequence(seed).spawn(dim)
            cols = []
            for j in range(dim):
                p = np.zeros(dim)
                p[j] = 1.0
                res = sample_shots(p, shots, source, np.random.default_rng(children[j]), n_qubits)
                cols.append(res.frequencies(n_qubits))
            a = np.array(cols).T
    else:
        results = list(source)
        if len(results) != dim:
            raise ValueError("one ShotResult per prepared basis state is required")
        if any(r.shots < min_shots for r in results):
            raise ValueError(f"calibration needs at least {min_shots} shots per state")
        a = np.array([r.frequencies(n_qubits) for r in results]).T
        shots = results[0].shots
    if np.linalg.cond(a) > cond_limit:
        raise SingularCalibration("calibration matrix is singular within tolerance")
    return CalibrationMatrix(a, shots)


@dataclass
class MitigatedProbabilities:
    probabilities: np.ndarray
    clipped: bool


def mitigate_counts(counts: ShotResult, cal: CalibrationMatrix) -> MitigatedProbabilities:
    """Invert the readout map; negative entries are clipped and renormalized."""
    n = cal.n_qubits
    if counts.n_bits != n:
        raise ValueError(f"counts have {counts.n_bits} bits but the calibration covers {n} qubits")
    f = counts.frequencies(n)
    p = np.linalg.solve(cal.matrix, f)
    clipped = bool(np.any(p < 0))
    if clipped:
        logger.debug("mitigated distribution had negative entries; clipping")
        p = np.clip(p, 0.0, None)
    return MitigatedProbabilities(p / p.sum(), clipped)


# ---------------------------------------------------------------------------
# zero-noise extrapolation


@dataclass
class ZnePointSet:
    r: np.ndarray
    value: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if np.any(self.stderr < 0):
                raise ValueError("standard errors must be non-negative")
        if len(set(self.r.tolist())) != len(self.r):
            raise ValueError("noise scales must be distinct")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "ZnePointSet":
        arr = np.asarray(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2] if arr.shape[1] > 2 else None)


@dataclass
class ZneFit:
    order: int
    coefficients: np.ndarray
    covariance: np.ndarray
    intercept: float
    stderr: float
    chi2: float
    dof: int
    interval: str = "t68"
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": [float(c) for c in self.coefficients],
            "covariance": np.asarray(self.covariance).tolist(),
            "intercept": float(self.intercept),
            "stderr": float(self.stderr),
            "chi2": float(self.chi2),
            "dof": int(self.dof),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def zne_extrapolate(points: ZnePointSet, order: int = 2, chi2_scale: bool = False,
                    interval: str = "t68") -> ZneFit:
    """Weighted polynomial fit in ``r`` evaluated at ``r = 0``.

    Parameters
    ----------
    order : {1, 2}
        Polynomial degree.
    chi2_scale : bool
        Inflate the covariance by the reduced chi-square when it exceeds one.
    interval : {"t68", "normal"}
        ``"t68"`` reports the half-width of the 68.27% Student-t interval on
        the intercept with ``dof`` degrees of freedom; ``"normal"`` reports
        the bare covariance standard deviation. They coincide as ``dof`` grows.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    n = len(points.r)
    if n < order + 1:
        raise ValueError(f"underdetermined fit: {n} points for order {order}")
    v = np.vander(points.r, order + 1, increasing=True)
    if points.stderr is None:
        w = np.ones(n)
    else:
        if np.any(points.stderr <= 0):
            raise ValueError("weighted fit needs positive standard errors")
        w = 1.0 / points.stderr ** 2
    a = v.T @ (v * w[:, None])
    cov = np.linalg.inv(a)
    coef = cov @ (v.T @ (w * points.value))
    resid = points.value - v @ coef
    chi2 = float(resid @ (w * resid))
    dof = n - order - 1
    if points.stderr is None:
        # unit weights: errors come from the residual scatter
        cov = cov * (chi2 / dof if dof > 0 else 0.0)
    elif chi2_scale and dof > 0 and chi2 / dof > 1:
        cov = cov * (chi2 / dof)
    sigma = math.sqrt(max(cov[0, 0], 0.0))
    if interval == "t68" and dof > 0:
        sigma *= stats.t.ppf(0.5 + _ONE_SIGMA / 2, dof)
    elif interval not in ("t68", "normal"):
        raise ValueError(f"unknown interval {interval!r}")
    return ZneFit(order, coef, cov, float(coef[0]), float(sigma), chi2, dof, interval)
