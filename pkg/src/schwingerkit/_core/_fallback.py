"""Pure-numpy implementations of the compiled kernels.

Outputs are identical to the Cython versions, element for element.
"""
import numpy as np

_CHUNK_BITS = 18


def enumerate_states(n_fs, lam, lt):
    """Return ``(occ, flux)`` for all Gauss-law states, ordered by (occ, seed)."""
    if n_fs < 1 or n_fs > 62:
        raise ValueError("n_fs out of range")
    if lam > 127:
        raise ValueError("link cutoff too large for int8 flux storage")
    sign = np.where(np.arange(n_fs) % 2 == 1, 1, -1).astype(np.int16)
    shifts = np.arange(n_fs, dtype=np.uint64)
    n_pat = 1 << n_fs
    chunk = min(n_pat, 1 << _CHUNK_BITS)
    occ_parts, flux_parts = [], []
    for start in range(0, n_pat, chunk):
        occ = np.arange(start, start + chunk, dtype=np.uint64)
        bits = ((occ[:, None] >> shifts) & np.uint64(1)).astype(np.int16)
        prefix = np.cumsum(bits * sign, axis=1, dtype=np.int16)
        keep = prefix[:, -1] == 0
        occ, prefix = occ[keep], prefix[keep]
        lo, hi = prefix.min(axis=1), prefix.max(axis=1)
        seeds = np.arange(-lam, lam + 1, dtype=np.int16)
        # candidate (pattern, seed) grid, flattened pattern-major
        ok = (seeds[None, :] + lo[:, None] >= -lam) & (seeds[None, :] + hi[:, None] <= lam)
        if lt is not None and lt >= 0:
            p1 = prefix.sum(axis=1, dtype=np.int64)
            p2 = (prefix.astype(np.int64) ** 2).sum(axis=1)
            s = seeds.astype(np.int64)[None, :]
            e2 = n_fs * s * s + 2 * s * p1[:, None] + p2[:, None]
            ok &= e2 <= lt
        row, col = np.nonzero(ok)
        occ_parts.append(occ[row])
        flux_parts.append((prefix[row] + seeds[col][:, None]).astype(np.int8))
    return np.concatenate(occ_parts), np.concatenate(flux_parts).reshape(-1, n_fs)


def orbit_reduce(trans, rank):
    """Vectorized orbit walk; see the compiled ``orbit_reduce``."""
    trans = np.asarray(trans, dtype=np.int64)
    rank = np.asarray(rank, dtype=np.int64)
    n = trans.shape[0]
    idx = np.arange(n, dtype=np.int64)
    size = np.zeros(n, dtype=np.int32)
    best = idx.copy()
    best_pow = np.zeros(n, dtype=np.int64)
    cur = trans.copy()
    step = 1
    while True:
        open_ = size == 0
        if not open_.any():
            break
        closed = open_ & (cur == idx)
        size[closed] = step
        better = open_ & ~closed & (rank[cur] < rank[best])
        best[better] = cur[better]
        best_pow[better] = step
        cur = trans[cur]
        step += 1
    # state = T^{-best_pow} best = T^{size - best_pow} best
    shift = ((size - best_pow) % size).astype(np.int32)
    return best, size, shift
