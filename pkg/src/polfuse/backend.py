"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The three kernels here (im2col, col2im, row-wise scatter-add) carry the
bulk of the arithmetic traffic of convolution forward/backward, reflection
padding backward and bilinear-resize backward.  Set ``POLFUSE_NO_NUMBA=1``
to force the numpy implementations; otherwise numba is used when available.

Both implementations accumulate in identical element order, so results are
bit-identical between backends (see tests/test_backend.py and
benchmarks/bench_kernels.py).
"""

import os

import numpy as np


def _im2col_np(x, kh, kw, sh, sw, ho, wo):
    # x: (B, C, Hp, Wp) already padded -> cols (B, C*kh*kw, ho*wo)
    b, c, _, _ = x.shape
    sb, sc, s0, s1 = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, kh, kw, ho, wo),
        strides=(sb, sc, s0, s1, sh * s0, sw * s1),
        writeable=False,
    )
    return np.ascontiguousarray(patches).reshape(b, c * kh * kw, ho * wo)


def _col2im_np(cols, b, c, hp, wp, kh, kw, sh, sw, ho, wo):
    # adjoint of _im2col_np; accumulation order is (kh, kw)-major per target
    out = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    cols6 = cols.reshape(b, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + sh * ho : sh, j : j + sw * wo : sw] += cols6[:, :, i, j]
    return out


def _scatter_add_rows_np(src, idx, width):
    # src: (R, N), idx: (N,) -> out (R, width); out[r, idx[n]] += src[r, n]
    r = src.shape[0]
    out = np.zeros((r, width), dtype=src.dtype)
    np.add.at(out, (np.arange(r)[:, None], idx[None, :]), src)
    return out


_use_numba = os.environ.get("POLFUSE_NO_NUMBA", "") not in ("1", "true", "yes")
if _use_numba:
    try:
        from numba import njit
    except ImportError:
        _use_numba = False

if _use_numba:

    @njit(cache=True)
    def _im2col_nb(x, kh, kw, sh, sw, ho, wo, cols):
        b, c, _, _ = x.shape
        for bi in range(b):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = ci * kh * kw + i * kw + j
                        for oy in range(ho):
                            base = oy * wo
                            iy = oy * sh + i
                            for ox in range(wo):
                                cols[bi, row, base + ox] = x[bi, ci, iy, ox * sw + j]

    @njit(cache=True)
    def _col2im_nb(cols, kh, kw, sh, sw, ho, wo, out):
        b, c, _, _ = out.shape
        for bi in range(b):
            for ci in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = ci * kh * kw + i * kw + j
                        for oy in range(ho):
                            base = oy * wo
                            iy = oy * sh + i
                            for ox in range(wo):
                                out[bi, ci, iy, ox * sw + j] += cols[bi, row, base + ox]

    @njit(cache=True)
    def _scatter_add_rows_nb(src, idx, out):
        r, n = src.shape
        for ri in range(r):
            for ni in range(n):
                out[ri, idx[ni]] += src[ri, ni]

    def _im2col(x, kh, kw, sh, sw, ho, wo):
        b, c, _, _ = x.shape
        cols = np.empty((b, c * kh * kw, ho * wo), dtype=x.dtype)
        _im2col_nb(np.ascontiguousarray(x), kh, kw, sh, sw, ho, wo, cols)
        return cols

    def _col2im(cols, b, c, hp, wp, kh, kw, sh, sw, ho, wo):
        out = np.zeros((b, c, hp, wp), dtype=cols.dtype)
        _col2im_nb(np.ascontiguousarray(cols), kh, kw, sh, sw, ho, wo, out)
        return out

    def _scatter_add_rows(src, idx, width):
        out = np.zeros((src.shape[0], width), dtype=src.dtype)
        _scatter_add_rows_nb(np.ascontiguousarray(src), idx, out)
        return out

    BACKEND = "numba"
    im2col, col2im, scatter_add_rows = _im2col, _col2im, _scatter_add_rows
else:
    BACKEND = "numpy"
    im2col, col2im, scatter_add_rows = _im2col_np, _col2im_np, _scatter_add_rows_np

# exposed for the benchmark and for backend-equality tests
numpy_impls = (_im2col_np, _col2im_np, _scatter_add_rows_np)
active_impls = (im2col, col2im, scatter_add_rows)
