"""Module tree, layers and the named-parameter collection.

Modules hold learnable Tensors and buffer arrays as attributes; walking
the tree in attribute insertion order yields deterministic dot-path
names like ``encoder1.conv1.bn.gamma``.  ``ModelParams`` freezes that
walk into the ordered collection the optimizer and checkpoint code work
with.
"""

import math

import numpy as np

from . import ops
from .autodiff import Tensor, default_dtype
from .errors import ValidationError


def kaiming_uniform(rng, shape, fan_in):
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base class; subclasses assign Tensors, buffers and child modules."""

    def __init__(self):
        object.__setattr__(self, "_tensors", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._children[name] = value
        elif isinstance(value, Tensor):
            self._tensors[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    def train(self, mode=True):
        object.__setattr__(self, "training", mode)
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def named_tensors(self, prefix=""):
        for name, t in self._tensors.items():
            yield prefix + name, t
        for cname, child in self._children.items():
            yield from child.named_tensors(prefix + cname + ".")

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(prefix + cname + ".")


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for m in modules:
            self.append(m)

    def append(self, module):
        self._children[str(len(self._items))] = module
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def __len__(self):
        return len(self._items)


class Parameter:
    """A named learnable tensor plus its Adam moment state."""

    __slots__ = ("name", "tensor", "adam_m", "adam_v", "step_count")

    def __init__(self, name, tensor):
        self.name = name
        self.tensor = tensor
        self.adam_m = np.zeros_like(tensor.data)
        self.adam_v = np.zeros_like(tensor.data)
        self.step_count = 0


class ModelParams:
    """Ordered, uniquely named collection of Parameters (plus buffers)."""

    def __init__(self, module):
        self._params = []
        self._by_name = {}
        self._buffers = []
        for name, t in module.named_tensors():
            if not t.requires_grad:
                continue
            if name in self._by_name:
                raise ValidationError("duplicate parameter name %r" % name)
            p = Parameter(name, t)
            self._params.append(p)
            self._by_name[name] = p
        buffer_names = set()
        for name, b in module.named_buffers():
            if name in self._by_name or name in buffer_names:
                raise ValidationError("duplicate buffer name %r" % name)
            buffer_names.add(name)
            self._buffers.append((name, b))

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def __getitem__(self, name):
        return self._by_name[name]

    def names(self):
        return [p.name for p in self._params]

    def buffers(self):
        return list(self._buffers)

    def zero_grad(self):
        for p in self._params:
            p.tensor.zero_grad()

    def state_entries(self):
        """(name, array) pairs in persistence order: parameters then buffers."""
        entries = [(p.name, p.tensor.data) for p in self._params]
        entries.extend((name, b) for name, b in self._buffers)
        return entries

    def load_state(self, arrays_by_name):
        """Overwrite parameter/buffer values in place from a name->array map."""
        expected = [name for name, _ in self.state_entries()]
        missing = [n for n in expected if n not in arrays_by_name]
        extra = [n for n in arrays_by_name if n not in set(expected)]
        if missing or extra:
            raise ValidationError(
                "state mismatch: missing %r, unexpected %r" % (missing[:3], extra[:3])
            )
        for p in self._params:
            arr = arrays_by_name[p.name]
            if arr.shape != p.tensor.data.shape:
                raise ValidationError("shape mismatch for %r" % p.name)
            p.tensor.data[...] = arr.astype(p.tensor.data.dtype)
        for name, b in self._buffers:
            arr = arrays_by_name[name]
            if arr.shape != b.shape:
                raise ValidationError("shape mismatch for buffer %r" % name)
            b[...] = arr.astype(b.dtype)


class Conv2d(Module):
    """3x3-style convolution layer; weights Kaiming-uniform, biases zero."""

    def __init__(self, rng, cin, cout, k, stride=1, padding=0, pad_mode="zeros", bias=True):
        super().__init__()
        dt = default_dtype()
        fan_in = cin * k * k
        self.weight = Tensor(
            kaiming_uniform(rng, (cout, cin, k, k), fan_in), requires_grad=True, dtype=dt
        )
        self.bias = Tensor(np.zeros(cout), requires_grad=True, dtype=dt) if bias else None
        self.stride = stride
        self.padding = padding
        self.pad_mode = pad_mode

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.pad_mode)


class ConvTranspose2d(Module):
    def __init__(self, rng, cin, cout, stride):
        super().__init__()
        dt = default_dtype()
        fan_in = cin * stride * stride
        self.weight = Tensor(
            kaiming_uniform(rng, (cin, cout, stride, stride), fan_in), requires_grad=True, dtype=dt
        )
        self.stride = stride

    def __call__(self, x):
        return ops.conv_transpose2d(x, self.weight, self.stride)


class Linear(Module):
    def __init__(self, rng, din, dout, bias=True):
        super().__init__()
        dt = default_dtype()
        self.weight = Tensor(kaiming_uniform(rng, (din, dout), din), requires_grad=True, dtype=dt)
        self.bias = Tensor(np.zeros(dout), requires_grad=True, dtype=dt) if bias else None

    def __call__(self, x):
        y = ops.matmul(x, self.weight)
        if self.bias is not None:
            y = ops.add(y, self.bias)
        return y


class BatchNorm2d(Module):
    def __init__(self, channels, momentum=0.1):
        super().__init__()
        dt = default_dtype()
        self.gamma = Tensor(np.ones(channels), requires_grad=True, dtype=dt)
        self.beta = Tensor(np.zeros(channels), requires_grad=True, dtype=dt)
        self.register_buffer("running_mean", np.zeros(channels, dtype=dt))
        self.register_buffer("running_var", np.ones(channels, dtype=dt))
        self.momentum = momentum

    def __call__(self, x):
        return ops.batchnorm2d(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            self.training, self.momentum,
        )


class LayerNorm(Module):
    def __init__(self, dim):
        super().__init__()
        dt = default_dtype()
        self.gamma = Tensor(np.ones(dim), requires_grad=True, dtype=dt)
        self.beta = Tensor(np.zeros(dim), requires_grad=True, dtype=dt)

    def __call__(self, x):
        return ops.layernorm(x, self.gamma, self.beta)
