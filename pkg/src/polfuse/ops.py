"""Differentiable operations on Tensors.

Every function here follows the same pattern: compute the forward value
with numpy (heavy gathers/scatters go through the kernel backend), wrap
it with ``make_result``, and attach a closure that routes the output
gradient to whichever inputs require one.

Numeric conventions:

- storage keeps the input dtype (float32 in production, float64 under
  ``use_dtype`` for oracle runs);
- reductions (sum, mean, norms, softmax/normalization statistics)
  accumulate in float64 and cast back;
- the attention-specific contractions (softmax denominator and the
  weights-times-values product) sum their addends in sorted order, which
  makes them a function of the value multiset only.  That is what turns
  "no positional encoding" into bit-exact within-window permutation
  equivariance instead of an up-to-rounding one.
"""

import numpy as np

from . import backend
from .autodiff import Tensor, as_tensor, make_result
from .errors import NumericError, ShapeError, ValidationError

BN_EPS = 1e-5
LN_EPS = 1e-5

SOBEL_X_KERNEL = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y_KERNEL = SOBEL_X_KERNEL.T.copy()


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (adjoint of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _coerce_pair(a, b):
    if isinstance(a, Tensor):
        b = b if isinstance(b, Tensor) else as_tensor(b, dtype=a.dtype)
    else:
        a = as_tensor(a, dtype=b.dtype)
    return a, b


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    a, b = _coerce_pair(a, b)
    out = make_result(a.data + b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(out.grad, b.shape))

        out._backward = _backward
    return out


def sub(a, b):
    a, b = _coerce_pair(a, b)
    out = make_result(a.data - b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(-out.grad, b.shape))

        out._backward = _backward
    return out


def mul(a, b):
    a, b = _coerce_pair(a, b)
    out = make_result(a.data * b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad * b.data, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(out.grad * a.data, b.shape))

        out._backward = _backward
    return out


def div(a, b):
    a, b = _coerce_pair(a, b)
    out = make_result(a.data / b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.accumulate_grad(_unbroadcast(out.grad / b.data, a.shape))
            if b.requires_grad:
                b.accumulate_grad(_unbroadcast(-out.grad * out.data / b.data, b.shape))

        out._backward = _backward
    return out


def neg(a):
    out = make_result(-a.data, (a,))
    if out.requires_grad:

        def _backward():
            a.accumulate_grad(-out.grad)

        out._backward = _backward
    return out


def relu(a):
    out = make_result(np.maximum(a.data, 0), (a,))
    if out.requires_grad:
        mask = a.data > 0

        def _backward():
            a.accumulate_grad(out.grad * mask)

        out._backward = _backward
    return out


def sigmoid(a):
    z = np.exp(-np.abs(a.data))
    y = np.where(a.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(a.dtype)
    out = make_result(y, (a,))
    if out.requires_grad:

        def _backward():
            a.accumulate_grad(out.grad * y * (1.0 - y))

        out._backward = _backward
    return out


def sqrt(a):
    if np.any(a.data < 0):
        raise NumericError("sqrt of negative values")
    y = np.sqrt(a.data)
    out = make_result(y, (a,))
    if out.requires_grad:

        def _backward():
            a.accumulate_grad(out.grad * (0.5 / y))

        out._backward = _backward
    return out


def absolute(a):
    out = make_result(np.abs(a.data), (a,))
    if out.requires_grad:
        sign = np.sign(a.data)

        def _backward():
            a.accumulate_grad(out.grad * sign)

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# reductions


def _sum_np(a, axis, keepdims):
    return a.sum(axis=axis, dtype=np.float64, keepdims=keepdims).astype(a.dtype)


def tsum(a, axis=None, keepdims=False):
    out = make_result(_sum_np(a.data, axis, keepdims), (a,))
    if out.requires_grad:

        def _backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a.accumulate_grad(np.broadcast_to(g, a.shape).astype(a.dtype))

        out._backward = _backward
    return out


def mean(a, axis=None, keepdims=False):
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.shape[ax]
    out = make_result(
        (a.data.sum(axis=axis, dtype=np.float64, keepdims=keepdims) / count).astype(a.dtype),
        (a,),
    )
    if out.requires_grad:

        def _backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a.accumulate_grad((np.broadcast_to(g, a.shape) / count).astype(a.dtype))

        out._backward = _backward
    return out


def variance(a, axis=None, keepdims=False):
    """Population variance, built from mean ops so it stays differentiable."""
    m = mean(a, axis=axis, keepdims=True)
    d = sub(a, m)
    return mean(mul(d, d), axis=axis, keepdims=keepdims)


def amax(a, axis, keepdims=False):
    """Max along one axis; gradient routes to the first maximum."""
    moved = np.moveaxis(a.data, axis, -1)
    arg = moved.argmax(axis=-1)
    vals = np.take_along_axis(moved, arg[..., None], axis=-1)
    res = np.moveaxis(vals, -1, axis)
    if not keepdims:
        res = np.squeeze(res, axis=axis)
    out = make_result(np.ascontiguousarray(res), (a,))
    if out.requires_grad:

        def _backward():
            g = out.grad
            if not keepdims:
                g = np.expand_dims(g, axis)
            gm = np.moveaxis(g, axis, -1)
            buf = np.zeros_like(moved)
            np.put_along_axis(buf, arg[..., None], gm, axis=-1)
            a.accumulate_grad(np.moveaxis(buf, -1, axis))

        out._backward = _backward
    return out


def l2_norm(a):
    """Euclidean norm of the whole tensor as a scalar.

    Subgradient at the origin is zero (relevant for zero-initialized
    biases at the first optimizer step).
    """
    sq = float(np.sum(a.data.astype(np.float64) ** 2))
    n = np.sqrt(sq)
    out = make_result(np.asarray(n, dtype=a.dtype), (a,))
    if out.requires_grad:

        def _backward():
            if n > 0.0:
                a.accumulate_grad((out.grad * (a.data / a.dtype.type(n))).astype(a.dtype))

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(a, shape):
    out = make_result(a.data.reshape(shape), (a,))
    if out.requires_grad:

        def _backward():
            a.accumulate_grad(out.grad.reshape(a.shape))

        out._backward = _backward
    return out


def transpose(a, axes):
    axes = tuple(axes)
    out = make_result(np.ascontiguousarray(a.data.transpose(axes)), (a,))
    if out.requires_grad:
        inverse = tuple(np.argsort(axes))

        def _backward():
            a.accumulate_grad(np.ascontiguousarray(out.grad.transpose(inverse)))

        out._backward = _backward
    return out


def concat(tensors, axis):
    tensors = list(tensors)
    if not tensors:
        raise ValidationError("concat of no tensors")
    base = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(base):
            raise ShapeError("concat rank mismatch")
        for ax, (s, s0) in enumerate(zip(t.shape, base)):
            if ax != (axis % len(base)) and s != s0:
                raise ShapeError("concat extent mismatch on axis %d" % ax)
    out = make_result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def _backward():
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx = [slice(None)] * out.grad.ndim
                    idx[axis] = slice(lo, hi)
                    t.accumulate_grad(out.grad[tuple(idx)])

        out._backward = _backward
    return out


def crop2d(a, top, left, height, width):
    if top < 0 or left < 0 or top + height > a.shape[2] or left + width > a.shape[3]:
        raise ShapeError("crop window outside tensor")
    out = make_result(np.ascontiguousarray(a.data[:, :, top : top + height, left : left + width]), (a,))
    if out.requires_grad:

        def _backward():
            g = np.zeros(a.shape, dtype=a.dtype)
            g[:, :, top : top + height, left : left + width] = out.grad
            a.accumulate_grad(g)

        out._backward = _backward
    return out


def _reflect_indices(n, lo, hi):
    """Source index for each position of an axis padded by (lo, hi).

    Uses the 2(n-1)-periodic triangular wave, so amounts may exceed the
    extent (the outer network pad needs that for small inputs).
    """
    if n == 1:
        return np.zeros(lo + 1 + hi, dtype=np.int64)
    pos = np.arange(-lo, n + hi, dtype=np.int64)
    period = 2 * (n - 1)
    r = np.mod(pos, period)
    return np.where(r < n, r, period - r).astype(np.int64)


def _scatter_axis(g, idx, n, axis):
    """Adjoint of ``np.take(a, idx, axis)``: scatter-add g back to extent n."""
    moved = np.moveaxis(g, axis, -1)
    lead = moved.shape[:-1]
    rows = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
    summed = backend.scatter_add_rows(rows, np.ascontiguousarray(idx), n)
    return np.moveaxis(summed.reshape(lead + (n,)), -1, axis)


def pad_reflect2d(a, top, bottom, left, right):
    b, c, h, w = a.shape
    idx_h = _reflect_indices(h, top, bottom)
    idx_w = _reflect_indices(w, left, right)
    out = make_result(np.ascontiguousarray(a.data[:, :, idx_h, :][:, :, :, idx_w]), (a,))
    if out.requires_grad:

        def _backward():
            g = _scatter_axis(out.grad, idx_w, w, 3)
            g = _scatter_axis(g, idx_h, h, 2)
            a.accumulate_grad(g)

        out._backward = _backward
    return out


def pad_zeros2d(a, top, bottom, left, right):
    out = make_result(
        np.pad(a.data, ((0, 0), (0, 0), (top, bottom), (left, right))), (a,)
    )
    if out.requires_grad:
        h, w = a.shape[2], a.shape[3]

        def _backward():
            a.accumulate_grad(out.grad[:, :, top : top + h, left : left + w])

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# dense linear algebra


def matmul(a, b):
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul inner extents %r x %r" % (a.shape, b.shape))
    out = make_result(np.matmul(a.data, b.data), (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                ga = np.matmul(out.grad, np.swapaxes(b.data, -1, -2))
                a.accumulate_grad(_unbroadcast(ga, a.shape))
            if b.requires_grad:
                gb = np.matmul(np.swapaxes(a.data, -1, -2), out.grad)
                b.accumulate_grad(_unbroadcast(gb, b.shape))

        out._backward = _backward
    return out


def _ordersum(a, axis):
    # canonical-order accumulation: permuting the addends cannot change
    # the result because they are sorted before the pairwise sum
    return np.sort(a, axis=axis).sum(axis=axis)


def softmax(a, axis=-1):
    x = a.data.astype(np.float64)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    denom = np.expand_dims(_ordersum(e, axis), axis)
    y64 = e / denom
    out = make_result(y64.astype(a.dtype), (a,))
    if out.requires_grad:

        def _backward():
            g = out.grad.astype(np.float64)
            gy = g * y64
            s = gy.sum(axis=axis, keepdims=True)
            a.accumulate_grad(((gy - y64 * s)).astype(a.dtype))

        out._backward = _backward
    return out


def attn_matmul(a, v):
    """Contraction out[..., r, c] = sum_j a[..., r, j] * v[..., j, c].

    The j axis is the token axis inside a window; addends are summed in
    sorted order (see module docstring).
    """
    if a.shape[-1] != v.shape[-2]:
        raise ShapeError("attn_matmul inner extents %r x %r" % (a.shape, v.shape))
    lead = np.broadcast_shapes(a.shape[:-2], v.shape[:-2])
    n_r, n_j = a.shape[-2], a.shape[-1]
    d = v.shape[-1]
    a3 = np.broadcast_to(a.data, lead + (n_r, n_j)).reshape(-1, n_r, n_j).astype(np.float64)
    v3 = np.broadcast_to(v.data, lead + (n_j, d)).reshape(-1, n_j, d).astype(np.float64)
    res = np.empty((a3.shape[0], n_r, d), dtype=np.float64)
    for i in range(a3.shape[0]):
        prod = a3[i][:, :, None] * v3[i][None, :, :]
        res[i] = _ordersum(prod, 1)
    out = make_result(res.reshape(lead + (n_r, d)).astype(a.dtype), (a, v))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                ga = np.matmul(out.grad, np.swapaxes(v.data, -1, -2))
                a.accumulate_grad(_unbroadcast(ga, a.shape))
            if v.requires_grad:
                gv = np.matmul(np.swapaxes(a.data, -1, -2), out.grad)
                v.accumulate_grad(_unbroadcast(gv, v.shape))

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# normalization


def batchnorm2d(x, gamma, beta, running_mean, running_var, training,
                momentum=0.1, eps=BN_EPS, update_running=True):
    """2-d batch normalization with per-channel affine parameters.

    ``running_mean``/``running_var`` are plain float arrays (buffers); in
    training mode they are updated in place with momentum 0.1, using the
    unbiased variance estimate for the running value while normalization
    itself uses the population variance.
    """
    b, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError("batchnorm affine parameters must have shape (%d,)" % c)
    if isinstance(running_mean, Tensor) or isinstance(running_var, Tensor):
        # a Tensor would make the in-place update silently rebind instead
        raise ValidationError("batchnorm running stats must be plain numpy buffers")
    if running_mean.shape != (c,) or running_var.shape != (c,):
        raise ShapeError("batchnorm running stats must have shape (%d,)" % c)
    x64 = x.data.astype(np.float64)
    if training:
        mu = x64.mean(axis=(0, 2, 3))
        var = x64.var(axis=(0, 2, 3))
        if update_running:
            n = b * h * w
            unbiased = var * (n / (n - 1)) if n > 1 else var
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.astype(running_mean.dtype)
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased.astype(running_var.dtype)
    else:
        mu = running_mean.astype(np.float64)
        var = running_var.astype(np.float64)
    if training:
        inv = 1.0 / np.sqrt(var + eps)
    else:
        # stored statistics carry no epsilon so that unit running stats
        # reproduce the input exactly; tiny clamp guards degenerate vars
        inv = 1.0 / np.sqrt(np.maximum(var, 1e-12))
    xhat64 = (x64 - mu[None, :, None, None]) * inv[None, :, None, None]
    y = gamma.data[None, :, None, None] * xhat64 + beta.data[None, :, None, None]
    out = make_result(y.astype(x.dtype), (x, gamma, beta))
    if out.requires_grad:
        xhat = xhat64.astype(x.dtype)

        def _backward():
            g = out.grad.astype(np.float64)
            xh = xhat.astype(np.float64)
            if gamma.requires_grad:
                gamma.accumulate_grad((g * xh).sum(axis=(0, 2, 3)).astype(gamma.dtype))
            if beta.requires_grad:
                beta.accumulate_grad(g.sum(axis=(0, 2, 3)).astype(beta.dtype))
            if x.requires_grad:
                dxhat = g * gamma.data.astype(np.float64)[None, :, None, None]
                if training:
                    n = b * h * w
                    s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
                    s2 = (dxhat * xh).sum(axis=(0, 2, 3), keepdims=True)
                    dx = (inv[None, :, None, None] / n) * (n * dxhat - s1 - xh * s2)
                else:
                    dx = dxhat * inv[None, :, None, None]
                x.accumulate_grad(dx.astype(x.dtype))

        out._backward = _backward
    return out


def layernorm(x, gamma, beta, eps=LN_EPS):
    """Normalize over the last axis with learnable scale and shift."""
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError("layernorm affine parameters must have shape (%d,)" % c)
    x64 = x.data.astype(np.float64)
    mu = x64.mean(axis=-1, keepdims=True)
    var = x64.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat64 = (x64 - mu) * inv
    y = gamma.data * xhat64 + beta.data
    out = make_result(y.astype(x.dtype), (x, gamma, beta))
    if out.requires_grad:

        def _backward():
            g = out.grad.astype(np.float64)
            if gamma.requires_grad:
                red = tuple(range(g.ndim - 1))
                gamma.accumulate_grad((g * xhat64).sum(axis=red).astype(gamma.dtype))
            if beta.requires_grad:
                red = tuple(range(g.ndim - 1))
                beta.accumulate_grad(g.sum(axis=red).astype(beta.dtype))
            if x.requires_grad:
                dxhat = g * gamma.data.astype(np.float64)
                s1 = dxhat.sum(axis=-1, keepdims=True)
                s2 = (dxhat * xhat64).sum(axis=-1, keepdims=True)
                dx = (inv / c) * (c * dxhat - s1 - xhat64 * s2)
                x.accumulate_grad(dx.astype(x.dtype))

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# convolution and resampling


def conv2d(x, weight, bias, stride=1, padding=0, pad_mode="zeros"):
    """Cross-correlation with optional zero or reflection padding.

    Output extents must come out exact: (H + 2*pad - kh) divisible by the
    stride.  Reflection padding here requires pad < H and pad < W; the
    standalone ``pad_reflect2d`` op handles larger amounts.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d expects 4-d input and weight")
    b, cin, h, w = x.shape
    cout, win, kh, kw = weight.shape
    if win != cin:
        raise ShapeError("conv2d channel mismatch: input %d, weight %d" % (cin, win))
    if bias is not None and bias.shape != (cout,):
        raise ShapeError("conv2d bias must have shape (%d,)" % cout)
    if padding > 0:
        if pad_mode == "reflect":
            if padding >= h or padding >= w:
                raise ValidationError("reflection padding amount must be smaller than the extents")
            x = pad_reflect2d(x, padding, padding, padding, padding)
        elif pad_mode == "zeros":
            x = pad_zeros2d(x, padding, padding, padding, padding)
        else:
            raise ValidationError("unknown pad_mode %r" % pad_mode)
    hp, wp = x.shape[2], x.shape[3]
    if hp < kh or wp < kw:
        raise ShapeError("kernel %dx%d does not fit padded input %dx%d" % (kh, kw, hp, wp))
    if (hp - kh) % stride or (wp - kw) % stride:
        raise ValidationError("conv2d output extent is not exact for stride %d" % stride)
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = backend.im2col(x.data, kh, kw, stride, stride, ho, wo)
    w2 = weight.data.reshape(cout, cin * kh * kw)
    y = np.matmul(w2, cols)
    if bias is not None:
        y = y + bias.data[:, None]
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = make_result(np.ascontiguousarray(y.reshape(b, cout, ho, wo)), parents)
    # the im2col buffer is recomputed in backward instead of captured,
    # keeping per-layer memory flat during training
    if out.requires_grad:

        def _backward():
            g2 = out.grad.reshape(b, cout, ho * wo)
            if bias is not None and bias.requires_grad:
                bias.accumulate_grad(g2.sum(axis=(0, 2), dtype=np.float64).astype(bias.dtype))
            if weight.requires_grad:
                cols_b = backend.im2col(x.data, kh, kw, stride, stride, ho, wo)
                gw = np.matmul(g2, cols_b.transpose(0, 2, 1)).sum(axis=0)
                weight.accumulate_grad(gw.reshape(weight.shape))
            if x.requires_grad:
                gcols = np.matmul(w2.T, g2)
                gx = backend.col2im(gcols, b, cin, hp, wp, kh, kw, stride, stride, ho, wo)
                x.accumulate_grad(gx)

        out._backward = _backward
    return out


def conv_transpose2d(x, weight, stride):
    """Adjoint-of-convolution upsampling restricted to kernel == stride.

    Each input pixel paints a disjoint stride-by-stride output block, so
    the output extents are exactly stride times the input extents.
    """
    b, cin, h, w = x.shape
    wcin, cout, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError("conv_transpose2d channel mismatch: input %d, weight %d" % (cin, wcin))
    if kh != stride or kw != stride:
        raise ValidationError(
            "conv_transpose2d requires kernel == stride (got %dx%d, stride %d)" % (kh, kw, stride)
        )
    k = stride
    blocks = np.tensordot(x.data, weight.data, axes=([1], [0]))  # (B,H,W,Cout,k,k)
    y = blocks.transpose(0, 3, 1, 4, 2, 5).reshape(b, cout, h * k, w * k)
    out = make_result(np.ascontiguousarray(y), (x, weight))
    if out.requires_grad:

        def _backward():
            g6 = out.grad.reshape(b, cout, h, k, w, k).transpose(0, 2, 4, 1, 3, 5)
            if x.requires_grad:
                gx = np.tensordot(g6, weight.data, axes=([3, 4, 5], [1, 2, 3]))
                x.accumulate_grad(np.ascontiguousarray(gx.transpose(0, 3, 1, 2)))
            if weight.requires_grad:
                gw = np.tensordot(x.data, g6, axes=([0, 2, 3], [0, 1, 2]))
                weight.accumulate_grad(np.ascontiguousarray(gw))

        out._backward = _backward
    return out


def _resize_axis_plan(n, out_len):
    src = (np.arange(out_len, dtype=np.float64) + 0.5) * (n / out_len) - 0.5
    src = np.clip(src, 0.0, n - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, src - i0


def _resize_axis_np(a, out_len, axis):
    n = a.shape[axis]
    i0, i1, frac = _resize_axis_plan(n, out_len)
    shape = [1] * a.ndim
    shape[axis] = out_len
    f = frac.astype(a.dtype).reshape(shape)
    t0 = np.take(a, i0, axis=axis)
    t1 = np.take(a, i1, axis=axis)
    # lerp as t0 + f*(t1-t0): exact for constant inputs
    return t0 + f * (t1 - t0), (i0, i1, f, n)


def bilinear_resize_np(a, out_h, out_w):
    """Plain-array bilinear resize (half-pixel centers) on the last two axes."""
    y, _ = _resize_axis_np(a, out_h, a.ndim - 2)
    y, _ = _resize_axis_np(y, out_w, a.ndim - 1)
    return y


def bilinear_resize(x, out_h, out_w):
    if out_h < 1 or out_w < 1:
        raise ValidationError("bilinear_resize target extents must be >= 1")
    y, plan_h = _resize_axis_np(x.data, out_h, 2)
    y, plan_w = _resize_axis_np(y, out_w, 3)
    out = make_result(y, (x,))
    if out.requires_grad:

        def _backward():
            g = out.grad

            def back_axis(g, plan, axis):
                i0, i1, f, n = plan
                g0 = _scatter_axis(g * (1.0 - f), i0, n, axis)
                g1 = _scatter_axis(g * f, i1, n, axis)
                return g0 + g1

            g = back_axis(g, plan_w, 3)
            g = back_axis(g, plan_h, 2)
            x.accumulate_grad(g.astype(x.dtype))

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# pooling


def _pool_windows(a):
    b, c, h, w = a.shape
    if h % 2 or w % 2:
        raise ShapeError("2x2 pooling requires even extents, got %dx%d" % (h, w))
    r = a.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(r).reshape(b, c, h // 2, w // 2, 4)


def _unpool_windows(g5, shape):
    b, c, h, w = shape
    r = g5.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(r).reshape(b, c, h, w)


def maxpool2d(x):
    win = _pool_windows(x.data)
    arg = win.argmax(axis=-1)
    out = make_result(np.take_along_axis(win, arg[..., None], axis=-1)[..., 0], (x,))
    if out.requires_grad:

        def _backward():
            g5 = np.zeros_like(win)
            np.put_along_axis(g5, arg[..., None], out.grad[..., None], axis=-1)
            x.accumulate_grad(_unpool_windows(g5, x.shape))

        out._backward = _backward
    return out


def avgpool2d(x):
    win = _pool_windows(x.data)
    out = make_result(
        (win.sum(axis=-1, dtype=np.float64) / 4.0).astype(x.dtype), (x,)
    )
    if out.requires_grad:

        def _backward():
            g5 = np.repeat(out.grad[..., None] / 4.0, 4, axis=-1).astype(x.dtype)
            x.accumulate_grad(_unpool_windows(g5, x.shape))

        out._backward = _backward
    return out


def global_avg_pool(x):
    b, c, h, w = x.shape
    out = make_result(
        (x.data.sum(axis=(2, 3), dtype=np.float64, keepdims=True) / (h * w)).astype(x.dtype),
        (x,),
    )
    if out.requires_grad:

        def _backward():
            x.accumulate_grad(np.broadcast_to(out.grad / (h * w), x.shape).astype(x.dtype))

        out._backward = _backward
    return out


def global_max_pool(x):
    b, c, h, w = x.shape
    flat = x.data.reshape(b, c, h * w)
    arg = flat.argmax(axis=-1)
    out = make_result(
        np.take_along_axis(flat, arg[..., None], axis=-1).reshape(b, c, 1, 1), (x,)
    )
    if out.requires_grad:

        def _backward():
            g = np.zeros_like(flat)
            np.put_along_axis(g, arg[..., None], out.grad.reshape(b, c, 1), axis=-1)
            x.accumulate_grad(g.reshape(x.shape))

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# fixed-kernel gradients


def _sobel_weight(kernel, dtype):
    return Tensor(kernel.reshape(1, 1, 3, 3), requires_grad=False, dtype=dtype)


def sobel_x(x):
    """Horizontal-derivative map (single-channel input, reflection pad 1)."""
    if x.shape[1] != 1:
        raise ShapeError("sobel operators expect a single channel")
    return conv2d(x, _sobel_weight(SOBEL_X_KERNEL, x.dtype.type), None, 1, 1, "reflect")


def sobel_y(x):
    if x.shape[1] != 1:
        raise ShapeError("sobel operators expect a single channel")
    return conv2d(x, _sobel_weight(SOBEL_Y_KERNEL, x.dtype.type), None, 1, 1, "reflect")


# ---------------------------------------------------------------------------
# operator sugar on Tensor

Tensor.__add__ = add
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = sub
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = mul
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = div
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = neg
