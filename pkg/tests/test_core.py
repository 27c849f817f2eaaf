import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwingerkit import _core
from schwingerkit._core import _fallback

_kernels = pytest.importorskip("schwingerkit._core._kernels")


def test_backend_selected():
    assert _core.BACKEND in ("cython", "python")


@settings(max_examples=40, deadline=None)
@given(n_spatial=st.integers(1, 5), lam=st.integers(0, 3), lt=st.integers(-1, 8))
def test_enumeration_backends_agree(n_spatial, lam, lt):
    a = _kernels.enumerate_states(2 * n_spatial, lam, lt)
    b = _fallback.enumerate_states(2 * n_spatial, lam, lt)
    for x, y in zip(a, b):
        assert x.dtype == y.dtype
        np.testing.assert_array_equal(x, y)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6).flatmap(lambda k: st.tuples(st.just(k), st.integers(1, 30))), st.integers(0, 2 ** 31))
def test_orbit_backends_agree(shape, seed):
    # random permutation built from disjoint cycles of length dividing k
    k, n_cycles = shape
    rng = np.random.default_rng(seed)
    lens = rng.choice([d for d in range(1, k + 1) if k % d == 0], size=n_cycles)
    perm = rng.permutation(int(lens.sum()))
    trans = np.empty(len(perm), dtype=np.int64)
    pos = 0
    for L in lens:
        cyc = perm[pos:pos + L]
        trans[cyc] = np.roll(cyc, -1)
        pos += L
    rank = rng.permutation(len(perm)).astype(np.int64)
    a = _kernels.orbit_reduce(trans, rank)
    b = _fallback.orbit_reduce(trans, rank)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_orbit_shift_reaches_state():
    trans = np.array([1, 2, 0, 4, 3, 5], dtype=np.int64)
    rank = np.array([5, 1, 3, 0, 2, 4], dtype=np.int64)
    canon, size, shift = _core.orbit_reduce(trans, rank)
    np.testing.assert_array_equal(size, [3, 3, 3, 2, 2, 1])
    for i in range(6):
        j = canon[i]
        for _ in range(shift[i]):
            j = trans[j]
        assert j == i
