import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwingerkit.circuits import Circuit, circuit_unitary
from schwingerkit.hamiltonian import HamiltonianParams, pauli_matrix
from schwingerkit.noise import (
    TWO_QUBIT_OBSERVABLES,
    NoiseModel,
    ShotResult,
    basis_change,
    check_density,
    depolarize,
    evolution_circuit,
    evolve_and_observe,
    expectation_from_probs,
    measure_pauli_expectation,
    probabilities,
    run_noisy,
    sample_shots,
    signature,
    two_site_decomposition,
)
from schwingerkit.spectra import evolve_exact
from schwingerkit.hamiltonian import build_hamiltonian

P = HamiltonianParams(0.6, 0.1)


def random_density(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 1), st.sampled_from([(0,), (1,), (0, 1), (2, 0)]))
def test_depolarize_keeps_density(seed, eps, qubits):
    rho = random_density(3, seed)
    out = depolarize(rho, qubits, eps, 3)
    check_density(out, tol=1e-9)


def test_depolarize_full_strength_is_partial_trace():
    rho = random_density(2, 7)
    out = depolarize(rho, (0, 1), 1.0, 2)
    np.testing.assert_allclose(out, np.eye(4) / 4, atol=1e-14)
    # one-of-three qubits: Tr_q0(rho) (x) I/2
    rho3 = random_density(3, 3)
    out3 = depolarize(rho3, (0,), 1.0, 3)
    red = np.einsum("aibi->ab", rho3.reshape(4, 2, 4, 2))
    np.testing.assert_allclose(out3, np.kron(red, np.eye(2) / 2), atol=1e-14)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(1.5)
    with pytest.raises(ValueError):
        NoiseModel(0.1, {0: [[0.9, 0.2], [0.1, 0.9]]})
    m = NoiseModel.symmetric_readout(0.1, 2).readout_matrix(2)
    np.testing.assert_allclose(m.sum(axis=1), 1)
    assert m[0, 3] == pytest.approx(0.01)


def test_check_density_rejects():
    with pytest.raises(ValueError):
        check_density(np.diag([1.0, 0.5]))
    with pytest.raises(ValueError):
        check_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        check_density(np.array([[0.5, 0.5], [0.0, 0.5]]))


@pytest.mark.parametrize("r", [0, 2, -1])
def test_even_noise_scale_rejected(r):
    with pytest.raises(ValueError):
        run_noisy(Circuit(2).cx(0, 1), r=r)


def test_noiseless_run_matches_unitary():
    c = evolution_circuit("cartan", two_site_decomposition(P), 2.4)
    u = circuit_unitary(c)
    rho = run_noisy(c, NoiseModel.ideal(), r=5)
    np.testing.assert_allclose(rho, np.outer(u[:, 0], u[:, 0].conj()), atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 0.2), st.sampled_from([1, 3, 5, 7]), st.integers(0, 100))
def test_noisy_state_is_valid(eps, r, seed):
    c = evolution_circuit("cartan", two_site_decomposition(P), seed * 0.2)
    check_density(run_noisy(c, NoiseModel(eps), r), tol=1e-9)


def test_folding_matches_explicit_triple_cnot():
    c1 = Circuit(2).h(0).cx(0, 1).u3(0.3, 0.1, 0.2, 1)
    c3 = Circuit(2).h(0).cx(0, 1).cx(0, 1).cx(0, 1).u3(0.3, 0.1, 0.2, 1)
    n = NoiseModel(0.05)
    np.testing.assert_allclose(run_noisy(c1, n, 3), run_noisy(c3, n, 1), atol=1e-14)


def test_single_cnot_first_order_model():
    # rho_out = (1 - r eps) CX rho CX + r eps I/4 + O(eps^2)
    c = Circuit(2).h(0).cx(0, 1)
    ideal = run_noisy(c)
    for r in (1, 3, 5):
        eps = 1e-4
        approx = (1 - r * eps) * ideal + r * eps * np.eye(4) / 4
        np.testing.assert_allclose(run_noisy(c, NoiseModel(eps), r), approx, atol=2 * (r * eps) ** 2)


@pytest.mark.parametrize("eps", [0.01, 0.03])
def test_expectation_nearly_linear_in_r(eps):
    c = evolution_circuit("cartan", two_site_decomposition(P), 2.4)
    rs = np.array([1, 3, 5, 7])
    vals = np.array([measure_pauli_expectation(c, "ZI", None, NoiseModel(eps), r).value for r in rs])
    quad, lin, _ = np.polyfit(rs, vals, 2)
    assert abs(quad) < 10 * eps ** 2 * abs(vals[0]) + 1e-12
    assert abs(quad) < 0.1 * abs(lin)


def test_deep_noise_limits():
    decomp = two_site_decomposition(P)
    c = evolution_circuit("cartan", decomp, 1.3)
    p = probabilities(run_noisy(c, NoiseModel(0.5), 25))
    assert p[0] == pytest.approx(0.25, abs=0.02)
    ts = evolve_and_observe("trotter", P, [3.0], shots=None, noise=NoiseModel(0.03), r=7, dt=0.1)
    assert ts.values["pair_probability"][0] == pytest.approx(0.5, abs=0.02)


# ---------------------------------------------------------------------------
# sampling


def test_sample_shots_deterministic_and_ordered():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    a = sample_shots(p, 1000, seed=5)
    b = sample_shots(p, 1000, seed=5)
    assert a.counts == b.counts
    assert sum(a.counts.values()) == 1000
    assert set(a.counts) <= {"00", "01", "10", "11"}
    json.loads(a.to_json())


def test_bitstring_is_msb_first():
    # X on qubit 1 only: outcome "10"
    c = Circuit(2).u3(np.pi, 0, np.pi, 1)
    res = sample_shots(run_noisy(c), 50, seed=0)
    assert res.counts == {"10": 50}


def test_readout_noise_law():
    noise = NoiseModel.symmetric_readout(0.2, 1)
    res = sample_shots(np.array([1.0, 0.0]), 200000, noise, seed=1)
    assert res.frequencies()[1] == pytest.approx(0.2, abs=0.005)


def test_shot_result_validation():
    with pytest.raises(ValueError):
        ShotResult({"0": 3}, 4)
    with pytest.raises(ValueError):
        sample_shots(np.array([1.0, 0.0]), 0)


@pytest.mark.parametrize("label", ["XX", "YY", "ZX", "IZ", "ZI", "XY", "YI", "IX"])
def test_basis_change_diagonalizes(label):
    b = circuit_unitary(basis_change(label))
    np.testing.assert_allclose(b @ pauli_matrix(label) @ b.conj().T, np.diag(signature(label)), atol=1e-12)


def test_basis_change_rejects_label():
    with pytest.raises(ValueError):
        basis_change("XQ")
    with pytest.raises(ValueError):
        measure_pauli_expectation(Circuit(2), "X", None)


@pytest.mark.parametrize("label", ["XX", "YY", "ZZ", "ZX", "IX", "IZ", "ZI", "XY"])
def test_exact_pauli_expectation(label):
    c = evolution_circuit("cartan", two_site_decomposition(P), 0.9)
    psi = circuit_unitary(c)[:, 0]
    exact = np.real(psi.conj() @ pauli_matrix(label) @ psi)
    assert measure_pauli_expectation(c, label, None).value == pytest.approx(exact, abs=1e-12)


def test_sampled_expectation_within_stderr():
    c = evolution_circuit("cartan", two_site_decomposition(P), 0.9)
    exact = measure_pauli_expectation(c, "XX", None).value
    est = measure_pauli_expectation(c, "XX", 100000, seed=3)
    assert abs(est.value - exact) < 4 * est.stderr


def test_expectation_from_probs():
    e = expectation_from_probs(np.array([0.5, 0.5]), np.array([1.0, -1.0]), 100)
    assert e.value == 0.0 and e.stderr == pytest.approx(0.1)
    assert expectation_from_probs(np.array([1.0, 0.0]), np.array([1.0, -1.0]), None).stderr == 0.0


# ---------------------------------------------------------------------------
# two-qubit dynamics


def test_two_site_decomposition_requires_four_states():
    with pytest.raises(ValueError):
        two_site_decomposition(P, lt=2)


@pytest.mark.parametrize("method", ["cartan", "trotter"])
def test_noiseless_probabilities_track_exact(two_qubit_sector, method):
    times = np.array([0.0, 0.5, 1.5, 3.0])
    ts = evolve_and_observe(method, P, times, shots=None, dt=0.01)
    ref = evolve_exact(build_hamiltonian(two_qubit_sector, P), np.eye(4)[0], times)
    tol = 1e-10 if method == "cartan" else 2e-2
    for k in ("pair_probability", "electric_energy", "chiral_condensate"):
        np.testing.assert_allclose(ts.values[k], ref.values[k], atol=tol)
    assert ts.values["pair_probability"][0] == 0.0


def test_evolve_and_observe_is_seeded():
    a = evolve_and_observe("cartan", P, [0.5, 1.0], shots=500, noise=NoiseModel(0.03), r=3, seed=9)
    b = evolve_and_observe("cartan", P, [0.5, 1.0], shots=500, noise=NoiseModel(0.03), r=3, seed=9)
    c = evolve_and_observe("cartan", P, [0.5, 1.0], shots=500, noise=NoiseModel(0.03), r=3, seed=10)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()
    assert set(a.values) == set(TWO_QUBIT_OBSERVABLES)


def test_unknown_method():
    with pytest.raises(ValueError):
        evolution_circuit("magnus", two_site_decomposition(P), 1.0)
