import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwingerkit.mitigation import (
    CalibrationMatrix,
    SingularCalibration,
    ZnePointSet,
    mitigate_counts,
    readout_calibrate,
    zne_extrapolate,
)
from schwingerkit.noise import NoiseModel, ShotResult, sample_shots

ENERGY_ROWS = [(1, -0.887, 0.015), (3, -0.684, 0.033), (5, -0.372, 0.034), (7, -0.167, 0.056)]
CONDENSATE_ROWS = [(1, -0.3073, 0.0037), (3, -0.3262, 0.0039), (5, -0.3411, 0.0068), (7, -0.3515, 0.0085)]
PAIR_ROWS = [(1, 0.0710, 0.0036), (3, 0.1178, 0.0046), (5, 0.1780, 0.0054), (7, 0.2632, 0.0062)]


# ---------------------------------------------------------------------------
# readout


def test_exact_calibration_is_transposed_confusion():
    noise = NoiseModel.symmetric_readout(0.05, 2)
    cal = readout_calibrate(noise, 2)
    np.testing.assert_allclose(cal.matrix, noise.readout_matrix(2).T)
    assert cal.n_qubits == 2


def test_mitigation_recovers_distribution():
    noise = NoiseModel(0.0, {0: [[0.97, 0.03], [0.08, 0.92]], 1: [[0.95, 0.05], [0.04, 0.96]]})
    cal = readout_calibrate(noise, 2, shots=200000, seed=4)
    p = np.array([0.4, 0.1, 0.2, 0.3])
    res = sample_shots(p, 200000, noise, seed=8)
    mitigated = mitigate_counts(res, cal).probabilities
    assert np.abs(mitigated - p).max() < 0.01
    assert np.abs(res.frequencies(2) - p).max() > 0.02


def test_calibration_from_results():
    noise = NoiseModel.symmetric_readout(0.1, 1)
    results = [sample_shots(np.eye(2)[j], 5000, noise, seed=j) for j in range(2)]
    cal = readout_calibrate(results, 1)
    assert cal.shots == 5000
    assert cal.matrix[1, 0] == pytest.approx(0.1, abs=0.02)


def test_calibration_errors():
    with pytest.raises(ValueError):
        readout_calibrate(NoiseModel.symmetric_readout(0.1, 1), 1, shots=10)
    with pytest.raises(ValueError):
        readout_calibrate([ShotResult({"0": 500}, 500)], 1)
    with pytest.raises(SingularCalibration):
        readout_calibrate(NoiseModel.symmetric_readout(0.5, 1), 1)
    with pytest.raises(ValueError):
        CalibrationMatrix(np.array([[0.9, 0.9], [0.1, 0.2]]))


def test_mitigation_clips_negative():
    cal = CalibrationMatrix(np.array([[0.9, 0.2], [0.1, 0.8]]))
    out = mitigate_counts(ShotResult({"0": 100}, 100), cal)
    assert out.clipped
    assert out.probabilities.sum() == pytest.approx(1.0)
    assert np.all(out.probabilities >= 0)


def test_mitigation_dimension_mismatch():
    cal = CalibrationMatrix(np.eye(4))
    with pytest.raises(ValueError):
        mitigate_counts(ShotResult({"000": 10}, 10), cal)


# ---------------------------------------------------------------------------
# zero-noise extrapolation


@pytest.mark.parametrize("rows,value,tol,quoted", [
    (ENERGY_ROWS, -1.000, 0.01, 0.065),
    (CONDENSATE_ROWS, -0.296, 0.005, 0.013),
    (PAIR_ROWS, 0.056, 0.005, 0.012),
])
def test_tabulated_quadratic_extrapolations(rows, value, tol, quoted):
    fit = zne_extrapolate(ZnePointSet.from_rows(rows), order=2)
    assert fit.intercept == pytest.approx(value, abs=tol)
    assert fit.stderr == pytest.approx(quoted, rel=0.3)
    assert fit.dof == 1


def test_normal_interval_is_narrower():
    pts = ZnePointSet.from_rows(ENERGY_ROWS)
    t = zne_extrapolate(pts, interval="t68")
    n = zne_extrapolate(pts, interval="normal")
    assert t.intercept == n.intercept
    assert t.stderr / n.stderr == pytest.approx(1.8373, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-0.1, 0.1), st.integers(1, 2))
def test_exact_polynomial_recovered(a, b, c, order):
    r = np.array([1.0, 3.0, 5.0, 7.0])
    y = a + b * r + (c * r ** 2 if order == 2 else 0)
    fit = zne_extrapolate(ZnePointSet(r, y, np.full(4, 0.01)), order=order)
    assert fit.intercept == pytest.approx(a, abs=1e-9)
    assert fit.chi2 == pytest.approx(0, abs=1e-9)


def test_unweighted_fit_uses_residual_scatter():
    r = np.array([1, 3, 5, 7, 9])
    fit = zne_extrapolate(ZnePointSet(r, 1 - 0.1 * r + np.array([0.01, -0.01, 0.01, -0.01, 0.01])), order=1)
    assert fit.stderr > 0
    assert fit.intercept == pytest.approx(1.0, abs=0.02)


def test_chi2_scaling_only_inflates():
    rows = [(1, 0.0, 0.01), (3, 0.1, 0.01), (5, 0.0, 0.01), (7, 0.1, 0.01)]
    pts = ZnePointSet.from_rows(rows)
    plain = zne_extrapolate(pts, 2)
    scaled = zne_extrapolate(pts, 2, chi2_scale=True)
    assert scaled.stderr > plain.stderr
    good = ZnePointSet.from_rows(PAIR_ROWS)
    assert zne_extrapolate(good, 2, chi2_scale=True).stderr == zne_extrapolate(good, 2).stderr


def test_zne_validation():
    with pytest.raises(ValueError):
        zne_extrapolate(ZnePointSet([1, 3], [0.1, 0.2]), order=2)
    with pytest.raises(ValueError):
        zne_extrapolate(ZnePointSet.from_rows(ENERGY_ROWS), order=3)
    with pytest.raises(ValueError):
        zne_extrapolate(ZnePointSet.from_rows(ENERGY_ROWS), interval="wide")
    with pytest.raises(ValueError):
        ZnePointSet([1, 1], [0.1, 0.2])
    with pytest.raises(ValueError):
        ZnePointSet([1, 3], [0.1, 0.2], [0.1, -0.1])
    with pytest.raises(ValueError):
        zne_extrapolate(ZnePointSet([1, 3, 5], [0.1, 0.2, 0.3], [0.1, 0.0, 0.1]), order=1)


def test_zne_fit_serialization():
    fit = zne_extrapolate(ZnePointSet.from_rows(CONDENSATE_ROWS))
    d = json.loads(fit.to_json())
    assert d["order"] == 2 and d["dof"] == 1
    assert d["intercept"] == fit.intercept
    assert len(d["coefficients"]) == 3
