"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--max-sites 12] [--repeat 3]``.
Both backends are imported directly, so one process compares them; outputs
are checked for equality before any timing is reported.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from schwingerkit import basis
from schwingerkit._core import _fallback

try:
    from schwingerkit._core import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def orbit_inputs(n_spatial: int):
    table = basis.enumerate_table(basis.LatticeConfig(n_spatial, 1))
    trans = np.ascontiguousarray(table.translation_index(), dtype=np.int64)
    rank = np.ascontiguousarray(table.display_rank(), dtype=np.int64)
    return trans, rank


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-sites", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    print(f"{'kernel':<18}{'N_s':>4}{'cython [s]':>13}{'python [s]':>13}{'speedup':>10}")
    for n in range(2, args.max_sites + 1, 2):
        a = _kernels.enumerate_states(2 * n, 1, -1)
        b = _fallback.enumerate_states(2 * n, 1, -1)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "enumeration backends disagree"
        tc = best_of(lambda: _kernels.enumerate_states(2 * n, 1, -1), args.repeat)
        tp = best_of(lambda: _fallback.enumerate_states(2 * n, 1, -1), args.repeat)
        print(f"{'enumerate_states':<18}{n:>4}{tc:>13.4f}{tp:>13.4f}{tp / tc:>10.1f}")

        trans, rank = orbit_inputs(n)
        a = _kernels.orbit_reduce(trans, rank)
        b = _fallback.orbit_reduce(trans, rank)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "orbit backends disagree"
        tc = best_of(lambda: _kernels.orbit_reduce(trans, rank), args.repeat)
        tp = best_of(lambda: _fallback.orbit_reduce(trans, rank), args.repeat)
        print(f"{'orbit_reduce':<18}{n:>4}{tc:>13.4f}{tp:>13.4f}{tp / tc:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
