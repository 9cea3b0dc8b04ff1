"""Reverse-mode automatic differentiation on numpy arrays.

The engine is deliberately small: a ``Tensor`` wraps an ndarray and, when
an operation produces it, remembers its parent tensors plus a closure that
propagates the output gradient to them.  The "tape" is therefore implicit:
every tensor carries a monotonically increasing creation id, and
``backward`` walks the reachable subgraph in descending id order, which is
exactly reverse execution order, visiting each recorded operation once.

Storage dtype defaults to float32.  Oracle code (finite-difference checks
and similar) can run the identical graph in float64 via ``use_dtype``.

Gradient reads: ``t.grad`` is ``None`` until some contribution reaches the
tensor during backward; a ``None`` gradient means zero.
"""

import contextlib
import itertools
import os

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

_ids = itertools.count()
_grad_enabled = True
_default_dtype = np.float32
_check_finite = os.environ.get("POLFUSE_CHECK_FINITE", "") in ("1", "true", "yes")


def default_dtype():
    return _default_dtype


@contextlib.contextmanager
def use_dtype(dtype):
    """Temporarily switch the dtype new tensors are created with."""
    global _default_dtype
    prev = _default_dtype
    _default_dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _default_dtype = prev


def grad_enabled():
    return _grad_enabled


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-d array with an optional gradient buffer and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.ascontiguousarray(data, dtype=dtype or _default_dtype)
        if _check_finite and not np.all(np.isfinite(arr)):
            raise NumericError("non-finite values in tensor data")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.size == 1 else _bad_item(self)

    def numpy(self):
        """Detached copy of the values."""
        return np.array(self.data, copy=True)

    def accumulate_grad(self, g):
        g = np.asarray(g, dtype=self.data.dtype)
        if g.shape != self.data.shape:
            raise ShapeError(
                "gradient shape %r does not match tensor shape %r" % (g.shape, self.data.shape)
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Propagate d(self)/d(reachable tensors); self must hold one value."""
        if self.size != 1:
            raise ValidationError("backward requires a scalar tensor, got shape %r" % (self.shape,))
        order = _reachable_in_creation_order(self)
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def __repr__(self):
        return "Tensor(shape=%r, dtype=%s, requires_grad=%r)" % (
            self.shape,
            self.data.dtype.name,
            self.requires_grad,
        )

    # Arithmetic operators are attached by the ops module to keep the graph
    # construction logic in one place.


def _bad_item(t):
    raise ValidationError("item() requires a single-element tensor, got shape %r" % (t.shape,))


def _reachable_in_creation_order(root):
    seen = {id(root)}
    stack = [root]
    nodes = []
    while stack:
        node = stack.pop()
        nodes.append(node)
        for p in node._parents:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append(p)
    nodes.sort(key=lambda n: n._id)
    return nodes


def make_result(data, parents):
    """Wrap an op result, recording graph edges when grads are wanted.

    The caller attaches ``out._backward`` (a thunk reading ``out.grad``
    and feeding ``accumulate_grad`` on the parents) only when
    ``out.requires_grad`` is set.  Constant subgraphs and ``no_grad``
    regions therefore never enter the tape.
    """
    track = _grad_enabled and any(p.requires_grad for p in parents)
    arr = np.asarray(data)
    out = Tensor(arr, requires_grad=track, dtype=arr.dtype)
    if track:
        out._parents = tuple(parents)
    return out


def as_tensor(value, dtype=None):
    """Coerce scalars/arrays to a constant Tensor (no grad)."""
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value), requires_grad=False, dtype=dtype)
