"""Timing comparison of the compiled kernels against their numpy fallbacks.

Run with:  python3 benchmarks/bench_kernels.py
Set POLFUSE_NO_NUMBA=1 to confirm the fallback path times on its own.

Each kernel is checked for exact (bitwise) agreement between the two
implementations before timing, then timed over enough repetitions to
be stable.  Times are per call, best of three batches.
"""

import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from polfuse import backend  # noqa: E402


def best_time(fn, args, repeats, batches=3):
    best = float("inf")
    for _ in range(batches):
        start = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - start) / repeats)
    return best


def conv_geometry(b, c, h, w, k, s):
    ho = (h - k) // s + 1
    wo = (w - k) // s + 1
    return ho, wo


def main():
    rng = np.random.default_rng(0)
    np_im2col, np_col2im, np_scatter = backend.numpy_impls
    ac_im2col, ac_col2im, ac_scatter = backend.active_impls
    same = ac_im2col is np_im2col
    print("active backend: %s%s" % (backend.BACKEND, " (fallback == active)" if same else ""))
    print()
    print("%-34s %12s %12s %8s" % ("case", "numpy", backend.BACKEND, "speedup"))

    cases = [
        ("im2col  3x3 s1  4x16x64x64", 3, 1, (4, 16, 64, 64)),
        ("im2col  3x3 s1  2x64x128x128", 3, 1, (2, 64, 128, 128)),
        ("im2col  2x2 s2  4x32x64x64", 2, 2, (4, 32, 64, 64)),
    ]
    for label, k, s, shape in cases:
        b, c, h, w = shape
        ho, wo = conv_geometry(b, c, h, w, k, s)
        x = rng.standard_normal(shape).astype(np.float32)
        ref = np_im2col(x, k, k, s, s, ho, wo)
        got = ac_im2col(x, k, k, s, s, ho, wo)
        assert ref.shape == got.shape and np.array_equal(ref, got), label
        t_np = best_time(np_im2col, (x, k, k, s, s, ho, wo), 10)
        t_ac = best_time(ac_im2col, (x, k, k, s, s, ho, wo), 10)
        print("%-34s %10.3fms %10.3fms %7.1fx" % (label, t_np * 1e3, t_ac * 1e3, t_np / t_ac))

    for label, k, s, shape in [
        ("col2im  3x3 s1  4x16x64x64", 3, 1, (4, 16, 64, 64)),
        ("col2im  3x3 s1  2x64x128x128", 3, 1, (2, 64, 128, 128)),
    ]:
        b, c, h, w = shape
        ho, wo = conv_geometry(b, c, h, w, k, s)
        cols = rng.standard_normal((b, c * k * k, ho * wo)).astype(np.float32)
        ref = np_col2im(cols, b, c, h, w, k, k, s, s, ho, wo)
        got = ac_col2im(cols, b, c, h, w, k, k, s, s, ho, wo)
        assert np.array_equal(ref, got), label
        t_np = best_time(np_col2im, (cols, b, c, h, w, k, k, s, s, ho, wo), 10)
        t_ac = best_time(ac_col2im, (cols, b, c, h, w, k, k, s, s, ho, wo), 10)
        print("%-34s %10.3fms %10.3fms %7.1fx" % (label, t_np * 1e3, t_ac * 1e3, t_np / t_ac))

    for label, rows, n, width in [
        ("scatter 256r 4096->8192", 256, 4096, 8192),
        ("scatter 64r 65536->131072", 64, 65536, 131072),
    ]:
        src = rng.standard_normal((rows, n)).astype(np.float32)
        idx = rng.integers(0, width, n)
        ref = np_scatter(src, idx, width)
        got = ac_scatter(src, idx, width)
        assert np.array_equal(ref, got), label
        t_np = best_time(np_scatter, (src, idx, width), 10)
        t_ac = best_time(ac_scatter, (src, idx, width), 10)
        print("%-34s %10.3fms %10.3fms %7.1fx" % (label, t_np * 1e3, t_ac * 1e3, t_np / t_ac))


if __name__ == "__main__":
    main()
