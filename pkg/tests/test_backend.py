"""The compiled kernels must agree bitwise with the numpy fallbacks."""

import numpy as np

from polfuse import backend


def _geometries():
    rng = np.random.default_rng(7)
    cases = []
    for _ in range(8):
        b = int(rng.integers(1, 4))
        c = int(rng.integers(1, 6))
        k = int(rng.integers(1, 4))
        s = int(rng.integers(1, 3))
        ho = int(rng.integers(1, 6))
        wo = int(rng.integers(1, 6))
        h = (ho - 1) * s + k
        w = (wo - 1) * s + k
        cases.append((b, c, h, w, k, s, ho, wo))
    cases.append((2, 3, 64, 48, 3, 1, 62, 46))
    cases.append((1, 8, 32, 32, 2, 2, 16, 16))
    return cases


def test_im2col_matches_fallback_bitwise():
    np_im2col = backend.numpy_impls[0]
    rng = np.random.default_rng(0)
    for b, c, h, w, k, s, ho, wo in _geometries():
        x = rng.standard_normal((b, c, h, w)).astype(np.float32)
        ref = np_im2col(x, k, k, s, s, ho, wo)
        got = backend.im2col(x, k, k, s, s, ho, wo)
        assert ref.shape == (b, c * k * k, ho * wo)
        assert np.array_equal(ref, got)


def test_col2im_matches_fallback_bitwise():
    np_col2im = backend.numpy_impls[1]
    rng = np.random.default_rng(1)
    for b, c, h, w, k, s, ho, wo in _geometries():
        cols = rng.standard_normal((b, c * k * k, ho * wo)).astype(np.float32)
        ref = np_col2im(cols, b, c, h, w, k, k, s, s, ho, wo)
        got = backend.col2im(cols, b, c, h, w, k, k, s, s, ho, wo)
        assert ref.shape == (b, c, h, w)
        assert np.array_equal(ref, got)


def test_col2im_overlap_accumulates():
    # stride 1, kernel 2: interior positions receive all four kernel taps
    cols = np.ones((1, 4, 4), dtype=np.float64)  # 2x2 kernel over 2x2 outputs
    out = backend.col2im(cols, 1, 1, 3, 3, 2, 2, 1, 1, 2, 2)
    expected = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64)
    assert np.array_equal(out[0, 0], expected)


def test_scatter_add_rows_matches_fallback():
    np_scatter = backend.numpy_impls[2]
    rng = np.random.default_rng(2)
    for _ in range(6):
        rows = int(rng.integers(1, 10))
        n = int(rng.integers(1, 200))
        width = int(rng.integers(1, 50))
        src = rng.standard_normal((rows, n)).astype(np.float32)
        idx = rng.integers(0, width, n)
        assert np.array_equal(
            np_scatter(src, idx, width), backend.scatter_add_rows(src, idx, width)
        )


def test_scatter_add_duplicate_indices_sum():
    src = np.array([[1.0, 2.0, 3.0, 4.0]])
    idx = np.array([1, 1, 0, 1])
    out = backend.scatter_add_rows(src, idx, 3)
    assert np.array_equal(out, np.array([[3.0, 7.0, 0.0]]))


def test_backend_name_reported():
    assert backend.BACKEND in ("numba", "numpy")
