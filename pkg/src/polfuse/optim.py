"""Bias-corrected Adam over a ModelParams collection."""

import numpy as np

from .errors import ValidationError


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one Adam update to every parameter, in declaration order.

    Moment math runs in float64 and the result is cast back to the
    parameter's storage dtype.  A parameter whose gradient buffer was
    never populated (no backward since the last zero_grad) is an error;
    an all-zero gradient is fine and leaves the value unchanged.
    """
    for p in params:
        if p.tensor.grad is None:
            raise ValidationError("missing gradient for parameter %r" % p.name)
    for p in params:
        g = p.tensor.grad.astype(np.float64)
        m = p.adam_m.astype(np.float64)
        v = p.adam_v.astype(np.float64)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        p.step_count += 1
        t = p.step_count
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        p.tensor.data[...] = (p.tensor.data.astype(np.float64) - update).astype(p.tensor.data.dtype)
        p.adam_m[...] = m.astype(p.adam_m.dtype)
        p.adam_v[...] = v.astype(p.adam_v.dtype)
