import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwingerkit.basis import (
    BasisState,
    LatticeConfig,
    UnsupportedChargeSector,
    apply_charge_conjugation,
    apply_parity,
    enumerate_physical,
    enumerate_table,
    exponential_fit,
    parity_basis,
    project_momentum,
    project_parity,
    scaling_table,
    sector_basis,
    table_from_states,
    translate,
    truncate_total_energy,
)

H = 2 ** -0.5


def comps(state):
    return [(s.occ_string, s.fluxes, round(c, 12)) for s, c in state.components]


# ---------------------------------------------------------------------------
# single states


def test_basis_state_properties():
    s = BasisState.from_strings("1100", [-1, 0, 0, 0])
    assert s.charges == (-1, 1, 0, 0)
    assert s.pair_count == 1
    assert s.electric_energy == 1
    assert s.satisfies_gauss()
    assert s.label() == "|e-e+..>|-1000>"
    assert s.to_dict() == {"occ": "1100", "flux": [-1, 0, 0, 0]}


def test_basis_state_rejects_bad_shapes():
    with pytest.raises(ValueError):
        BasisState((1, 0), (0,))
    with pytest.raises(ValueError):
        BasisState((1, 0, 0), (0, 0, 0))


def test_gauss_violation_detected():
    assert not BasisState.from_strings("1100", [0, 0, 0, 0]).satisfies_gauss()


@pytest.mark.parametrize("bad", [dict(n_spatial=0), dict(n_spatial=2, link_cutoff=-1),
                                 dict(n_spatial=2, total_energy_cutoff=-2)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        LatticeConfig(**bad)


def test_nonzero_charge_rejected():
    with pytest.raises(UnsupportedChargeSector):
        enumerate_table(LatticeConfig(2, 1, charge=1))


def test_resource_guard():
    with pytest.raises(ValueError):
        enumerate_table(LatticeConfig(13, 1))


# ---------------------------------------------------------------------------
# enumeration


TWO_SITE = [
    ("0000", (-1, -1, -1, -1)), ("0000", (0, 0, 0, 0)), ("0000", (1, 1, 1, 1)),
    ("1100", (-1, 0, 0, 0)), ("1100", (0, 1, 1, 1)),
    ("0110", (-1, 0, -1, -1)), ("0110", (0, 1, 0, 0)),
    ("1001", (-1, -1, -1, 0)), ("1001", (0, 0, 0, 1)),
    ("0011", (0, 0, -1, 0)), ("0011", (1, 1, 0, 1)),
    ("1111", (-1, 0, -1, 0)), ("1111", (0, 1, 0, 1)),
]


def test_two_site_states():
    got = [(s.occ_string, s.fluxes) for s in enumerate_physical(LatticeConfig(2, 1))]
    assert got == TWO_SITE


@pytest.mark.parametrize("n,lam,expected", [(1, 1, 5), (2, 1, 13), (1, 0, 1), (2, 2, 25)])
def test_physical_counts(n, lam, expected):
    assert len(enumerate_table(LatticeConfig(n, lam))) == expected


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 3), lam=st.integers(0, 2))
def test_every_state_satisfies_gauss(n, lam):
    for s in enumerate_physical(LatticeConfig(n, lam)):
        assert s.satisfies_gauss()
        assert all(abs(l) <= lam for l in s.fluxes)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 3), lam=st.integers(1, 2), lt=st.integers(0, 6))
def test_total_cutoff_at_enumeration(n, lam, lt):
    states = enumerate_physical(LatticeConfig(n, lam, lt))
    full = [s for s in enumerate_physical(LatticeConfig(n, lam)) if s.electric_energy <= lt]
    assert states == full


@pytest.mark.parametrize("n,lam", [(1, 1), (2, 1), (2, 2), (3, 1)])
@pytest.mark.parametrize("op", [
    lambda s: translate(s, 1),
    lambda s: apply_parity(s, "electron"),
    lambda s: apply_parity(s, "positron"),
    lambda s: apply_charge_conjugation(s, +1),
    lambda s: apply_charge_conjugation(s, -1),
])
def test_symmetries_are_bijections(n, lam, op):
    states = enumerate_physical(LatticeConfig(n, lam))
    image = [op(s) for s in states]
    assert sorted(image, key=lambda s: (s.occupations, s.fluxes)) == \
        sorted(states, key=lambda s: (s.occupations, s.fluxes))


def test_translation_has_order_n():
    for s in enumerate_physical(LatticeConfig(3, 1)):
        assert translate(s, 3) == s


def test_parity_is_involution():
    for s in enumerate_physical(LatticeConfig(2, 2)):
        assert apply_parity(apply_parity(s)) == s
        assert apply_parity(apply_parity(s, "positron"), "positron") == s


def test_charge_conjugation_directions_are_inverse():
    for s in enumerate_physical(LatticeConfig(2, 1)):
        assert apply_charge_conjugation(apply_charge_conjugation(s, +1), -1) == s


def test_unknown_parity_axis():
    with pytest.raises(ValueError):
        apply_parity(BasisState.from_strings("00", [0, 0]), "diagonal")


def test_lookup_roundtrip():
    t = enumerate_table(LatticeConfig(3, 1))
    idx = t.lookup(t.occ, t.flux[:, -1].astype(np.int64))
    np.testing.assert_array_equal(idx, np.arange(len(t)))
    with pytest.raises(ValueError):
        t.lookup(np.array([1], dtype=np.uint64), np.array([0]))


def test_table_from_states_roundtrip():
    states = enumerate_physical(LatticeConfig(2, 1))
    t = table_from_states(states[::-1])
    assert t.states() == states


# ---------------------------------------------------------------------------
# projections


def test_k0_two_site_states():
    b = sector_basis(LatticeConfig(2, 1), 0, None)
    got = [comps(s) for s in b.states]
    assert got == [
        [("0000", (0, 0, 0, 0), 1.0)],
        [("1001", (0, 0, 0, 1), round(H, 12)), ("0110", (0, 1, 0, 0), round(H, 12))],
        [("1100", (-1, 0, 0, 0), round(H, 12)), ("0011", (0, 0, -1, 0), round(H, 12))],
        [("1111", (-1, 0, -1, 0), 1.0)],
        [("1111", (0, 1, 0, 1), 1.0)],
        [("1001", (-1, -1, -1, 0), round(H, 12)), ("0110", (-1, 0, -1, -1), round(H, 12))],
        [("1100", (0, 1, 1, 1), round(H, 12)), ("0011", (1, 1, 0, 1), round(H, 12))],
        [("0000", (1, 1, 1, 1), 1.0)],
        [("0000", (-1, -1, -1, -1), 1.0)],
    ]


def test_even_parity_two_site_states(even_sector):
    got = [comps(s) for s in even_sector.states]
    h = round(H, 12)
    assert got == [
        [("0000", (0, 0, 0, 0), 1.0)],
        [("1100", (-1, 0, 0, 0), 0.5), ("0110", (0, 1, 0, 0), 0.5),
         ("1001", (0, 0, 0, 1), 0.5), ("0011", (0, 0, -1, 0), 0.5)],
        [("1111", (-1, 0, -1, 0), h), ("1111", (0, 1, 0, 1), h)],
        [("1100", (0, 1, 1, 1), 0.5), ("0110", (-1, 0, -1, -1), 0.5),
         ("1001", (-1, -1, -1, 0), 0.5), ("0011", (1, 1, 0, 1), 0.5)],
        [("0000", (1, 1, 1, 1), h), ("0000", (-1, -1, -1, -1), h)],
    ]


def test_odd_parity_signs():
    b = sector_basis(LatticeConfig(2, 1), 0, -1)
    signs = [[np.sign(c) for _, c in s.components] for s in b.states]
    assert signs == [[1, -1, -1, 1], [1, -1], [1, -1, -1, 1], [1, -1]]


def test_antisymmetric_sector():
    b = sector_basis(LatticeConfig(2, 1), 1, None)
    assert len(b) == 4
    for s in b.states:
        (_, c0), (_, c1) = s.components
        assert c0 == pytest.approx(H) and c1 == pytest.approx(-H)


@pytest.mark.parametrize("P,dim", [(1, 3), (-1, 2)])
def test_one_site_parity(P, dim):
    b = parity_basis(enumerate_physical(LatticeConfig(1, 1)), P)
    assert len(b) == dim
    assert len(sector_basis(LatticeConfig(1, 1), None, P)) == dim


def test_translation_invariant_state_keeps_unit_coefficient():
    b = project_momentum(enumerate_physical(LatticeConfig(2, 1)), 0)
    vac = b.state(0)
    assert comps(vac) == [("0000", (0, 0, 0, 0), 1.0)]


def test_invalid_momentum():
    with pytest.raises(ValueError):
        sector_basis(LatticeConfig(3, 1), 1, None)


def test_parity_rejects_nonzero_k():
    b = sector_basis(LatticeConfig(2, 1), 1, None)
    with pytest.raises(ValueError):
        project_parity(b, +1)


@pytest.mark.parametrize("n,lam", [(2, 1), (2, 2), (4, 1)])
def test_dimension_identities(n, lam):
    cfg = LatticeConfig(n, lam)
    d_phys = len(enumerate_table(cfg))
    k0 = sector_basis(cfg, 0, None)
    k1 = sector_basis(cfg, 1, None)
    even = sector_basis(cfg, 0, +1)
    odd = sector_basis(cfg, 0, -1)
    assert len(even) + len(odd) == len(k0)
    if n == 2:
        assert len(k0) + len(k1) == d_phys


@pytest.mark.parametrize("n,k,P", [(2, 0, 1), (2, 0, -1), (2, 1, None), (4, 0, 1), (3, 0, None), (1, None, -1)])
def test_projection_orthonormal_and_homogeneous(n, k, P):
    b = sector_basis(LatticeConfig(n, 1), k, P)
    p = b.projection.toarray()
    np.testing.assert_allclose(p.T @ p, np.eye(len(b)), atol=1e-12)
    for s in b.states:
        assert s.norm() == pytest.approx(1.0)
        assert len({c.pair_count for c, _ in s.components}) == 1
        assert len({c.electric_energy for c, _ in s.components}) == 1


def test_sector_ordering_by_energy(even_sector):
    e = [s.electric_energy for s in even_sector.states]
    assert e == sorted(e) == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("lt,dim", [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (10, 5)])
def test_truncation(even_sector, lt, dim):
    t = truncate_total_energy(even_sector, lt)
    assert len(t) == dim
    assert t.truncation == lt
    assert [s.electric_energy for s in t.states] == list(range(dim))


def test_truncation_below_minimum_is_empty():
    odd = sector_basis(LatticeConfig(2, 1), 0, -1)
    assert truncate_total_energy(odd, 0).is_empty


def test_basis_json(two_qubit_sector):
    data = json.loads(two_qubit_sector.to_json())
    assert len(data) == 4
    assert data[0] == {"occ": ["0000"], "flux": [[0, 0, 0, 0]], "coeffs": [1.0]}


# ---------------------------------------------------------------------------
# scaling


def test_scaling_small_rows():
    rows = scaling_table([1, 2, 4, 6])
    got = [(r.n_spatial, r.d_lattice, r.d_physical, r.d_k0, r.d_even, r.d_odd) for r in rows]
    assert got == [
        (1, 64, 5, None, 3, 2),
        (2, 4096, 13, 9, 5, 4),
        (4, 64 ** 4, 117, 35, 19, 16),
        (6, 64 ** 6, 1186, 210, 110, 100),
    ]
    assert rows[1].qubit_counts == {"lattice": 12, "physical": 4, "k0": 4, "even": 3, "odd": 2}


@pytest.mark.parametrize("n", [2, 4])
def test_orbit_counts_match_built_bases(n):
    row = scaling_table([n])[0]
    cfg = LatticeConfig(n, 1)
    assert row.d_k0 == len(sector_basis(cfg, 0, None))
    assert row.d_even == len(sector_basis(cfg, 0, +1))
    assert row.d_odd == len(sector_basis(cfg, 0, -1))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.1, 10), b=st.floats(0.1, 2))
def test_exponential_fit_exact(a, b):
    n = np.arange(1, 8)
    fa, fb = exponential_fit(n, a * np.exp(b * n))
    assert fa == pytest.approx(a, rel=1e-8)
    assert fb == pytest.approx(b, rel=1e-8)
