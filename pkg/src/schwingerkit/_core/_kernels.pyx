# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for Gauss-law enumeration and translation-orbit reduction."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int8_t, int32_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef Py_ssize_t _scan(int n_fs, int lam, long long lt, uint64_t[::1] occ_out,
                      int8_t[:, ::1] flux_out, bint fill) noexcept nogil:
    cdef uint64_t even_mask = 0, occ, n_pat = (<uint64_t>1) << n_fs
    cdef int n, s, v, lo, hi
    cdef int prefix[64]
    cdef long long e2
    cdef Py_ssize_t count = 0
    for n in range(0, n_fs, 2):
        even_mask |= (<uint64_t>1) << n
    for occ in range(n_pat):
        if __builtin_popcountll(occ & even_mask) != __builtin_popcountll(occ & ~even_mask):
            continue
        # prefix charge sums; link n carries s + prefix[n]
        v = 0
        lo = 0
        hi = 0
        for n in range(n_fs):
            if (occ >> n) & 1:
                v += 1 if (n & 1) else -1
            prefix[n] = v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        for s in range(-lam, lam + 1):
            if s + lo < -lam or s + hi > lam:
                continue
            if lt >= 0:
                e2 = 0
                for n in range(n_fs):
                    e2 += (s + prefix[n]) * (s + prefix[n])
                if e2 > lt:
                    continue
            if fill:
                occ_out[count] = occ
                for n in range(n_fs):
                    flux_out[count, n] = <int8_t>(s + prefix[n])
            count += 1
    return count


def enumerate_states(int n_fs, int lam, long long lt):
    """Return ``(occ, flux)`` for all Gauss-law states, ordered by (occ, seed)."""
    if n_fs < 1 or n_fs > 62:
        raise ValueError("n_fs out of range for the compiled kernel")
    if lam > 127:
        raise ValueError("link cutoff too large for int8 flux storage")
    cdef uint64_t[::1] occ_dummy = np.zeros(1, dtype=np.uint64)
    cdef int8_t[:, ::1] flux_dummy = np.zeros((1, n_fs), dtype=np.int8)
    cdef Py_ssize_t n
    with nogil:
        n = _scan(n_fs, lam, lt, occ_dummy, flux_dummy, False)
    occ = np.empty(n, dtype=np.uint64)
    flux = np.empty((n, n_fs), dtype=np.int8)
    cdef uint64_t[::1] occ_v = occ
    cdef int8_t[:, ::1] flux_v = flux
    with nogil:
        _scan(n_fs, lam, lt, occ_v, flux_v, True)
    return occ, flux


def orbit_reduce(const int64_t[::1] trans, const int64_t[::1] rank):
    """Walk each translation orbit once.

    Returns ``(canon, size, shift)``: the lowest-rank member of the orbit,
    the orbit length and the power ``j`` with ``state = T^j canon``.
    """
    cdef Py_ssize_t n = trans.shape[0], i, j, m, best, p
    canon_a = np.full(n, -1, dtype=np.int64)
    size_a = np.zeros(n, dtype=np.int32)
    shift_a = np.zeros(n, dtype=np.int32)
    cdef int64_t[::1] canon = canon_a
    cdef int32_t[::1] size = size_a
    cdef int32_t[::1] shift = shift_a
    with nogil:
        for i in range(n):
            if canon[i] >= 0:
                continue
            # orbit length and best member
            best = i
            p = 1
            j = trans[i]
            while j != i:
                if rank[j] < rank[best]:
                    best = j
                p += 1
                j = trans[j]
            # second pass: label members relative to best
            j = best
            for m in range(p):
                canon[j] = best
                size[j] = <int32_t>p
                shift[j] = <int32_t>m
                j = trans[j]
    return canon_a, size_a, shift_a
