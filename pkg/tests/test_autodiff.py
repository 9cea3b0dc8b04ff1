"""Reverse-mode engine semantics: graph walk, accumulation, contexts."""

import numpy as np
import pytest

from polfuse import ops
from polfuse.autodiff import Tensor, default_dtype, grad_enabled, no_grad, use_dtype
from polfuse.errors import ValidationError


def test_tensor_defaults_float32():
    t = Tensor([1.0, 2.0])
    assert t.dtype == np.float32
    assert not t.requires_grad
    assert t.grad is None


def test_use_dtype_switches_default():
    with use_dtype(np.float64):
        assert default_dtype() == np.float64
        assert Tensor([1.0]).dtype == np.float64
    assert default_dtype() == np.float32


def test_item_and_numpy():
    t = Tensor(3.5)
    assert t.item() == 3.5
    assert isinstance(t.numpy(), np.ndarray)


def test_backward_requires_scalar():
    t = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValidationError):
        t.backward()


def test_diamond_graph_accumulates_exactly_once():
    # y = (x + x) * x = 2x^2; dy/dx = 4x
    x = Tensor(3.0, requires_grad=True)
    s = ops.add(x, x)
    y = ops.mul(s, x)
    y.backward()
    assert x.grad is not None
    assert x.grad.item() == 12.0


def test_shared_subexpression_single_visit():
    # z = u + u where u = x * x; dz/dx = 4x, u visited once
    x = Tensor(2.0, requires_grad=True)
    u = ops.mul(x, x)
    z = ops.add(u, u)
    z.backward()
    assert x.grad.item() == 8.0


def test_leaf_without_requires_grad_gets_no_grad():
    a = Tensor(1.0, requires_grad=True)
    b = Tensor(2.0)
    y = ops.mul(a, b)
    y.backward()
    assert a.grad is not None
    assert b.grad is None


def test_no_grad_suppresses_graph():
    x = Tensor(1.0, requires_grad=True)
    with no_grad():
        assert not grad_enabled()
        y = ops.mul(x, x)
    assert not y.requires_grad
    assert y._parents == ()


def test_zero_grad_resets():
    x = Tensor(2.0, requires_grad=True)
    ops.mul(x, x).backward()
    assert x.grad is not None
    x.zero_grad()
    assert x.grad is None


def test_grad_accumulates_across_backward_calls():
    x = Tensor(2.0, requires_grad=True)
    ops.mul(x, x).backward()
    first = x.grad.item()
    ops.mul(x, x).backward()
    assert x.grad.item() == 2.0 * first


def test_operator_sugar_matches_functions():
    a = Tensor([1.0, -2.0], requires_grad=True)
    b = Tensor([3.0, 4.0])
    assert np.allclose((a + b).data, ops.add(a, b).data)
    assert np.allclose((a * b).data, ops.mul(a, b).data)
    assert np.allclose((a - b).data, ops.sub(a, b).data)
    assert np.allclose((a / b).data, ops.div(a, b).data)
    assert np.allclose((2.0 * a).data, 2.0 * a.data)
    assert np.allclose((-a).data, -a.data)


def test_python_scalars_promote_to_default_dtype():
    a = Tensor([1.0, 2.0])
    y = a + 1.5
    assert y.dtype == a.dtype
    assert np.allclose(y.data, [2.5, 3.5])


def test_ids_are_monotonic():
    a = Tensor(1.0)
    b = Tensor(2.0)
    c = ops.add(a, b)
    assert a._id < b._id < c._id
