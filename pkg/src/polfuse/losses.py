"""Composite training objective: SSIM + L1 + contrast + texture + weight norm.

All terms are differentiable Tensor expressions.  Weighting follows
``LossWeights`` (repository defaults 1, 1, 0.5, 0.5, 1e-4); the fused
image is scored against both sources symmetrically.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Tensor
from .errors import NumericError, ShapeError, ValidationError

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
CONTRAST_EPS = 1e-8


@dataclass
class LossWeights:
    ssim: float = 1.0
    l1: float = 1.0
    con: float = 0.5
    tex: float = 0.5
    reg: float = 1e-4

    def __post_init__(self):
        for name in ("ssim", "l1", "con", "tex", "reg"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError("loss weight %s must be finite and >= 0" % name)


@dataclass
class LossBreakdown:
    ssim: float
    l1: float
    con: float
    tex: float
    reg: float
    total: float


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def _window_tensor(dtype):
    k = gaussian_window().reshape(1, 1, SSIM_WINDOW, SSIM_WINDOW)
    return Tensor(k, requires_grad=False, dtype=dtype.type)


def ssim_map(x, y):
    """Mean structural similarity over all valid 11x11 Gaussian windows."""
    if x.shape != y.shape:
        raise ShapeError("ssim operands must share one shape")
    if x.shape[2] < SSIM_WINDOW or x.shape[3] < SSIM_WINDOW:
        raise ShapeError("ssim needs spatial extents of at least %d" % SSIM_WINDOW)
    win = _window_tensor(x.dtype)
    mu_x = ops.conv2d(x, win, None)
    mu_y = ops.conv2d(y, win, None)
    sig_x = ops.conv2d(x * x, win, None) - mu_x * mu_x
    sig_y = ops.conv2d(y * y, win, None) - mu_y * mu_y
    sig_xy = ops.conv2d(x * y, win, None) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * sig_xy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sig_x + sig_y + SSIM_C2)
    return ops.mean(num / den)


def ssim_loss(pred, s0, dolp):
    a = 1.0 - ssim_map(pred, s0)
    b = 1.0 - ssim_map(pred, dolp)
    return 0.5 * (a + b)


def l1_loss(pred, s0, dolp):
    a = ops.mean(ops.absolute(pred - s0))
    b = ops.mean(ops.absolute(pred - dolp))
    return 0.5 * (a + b)


def contrast_loss(pred):
    """Hinge on the spatial standard deviation, per image and channel."""
    var = ops.variance(pred, axis=(2, 3))
    sd = ops.sqrt(var + CONTRAST_EPS)
    return ops.mean(ops.relu(1.0 - sd))


def texture_loss(pred, s0, dolp):
    """Mean absolute Sobel-gradient difference, averaged over both sources."""
    gx_p, gy_p = ops.sobel_x(pred), ops.sobel_y(pred)
    terms = []
    for target in (s0, dolp):
        dx = ops.mean(ops.absolute(gx_p - ops.sobel_x(target)))
        dy = ops.mean(ops.absolute(gy_p - ops.sobel_y(target)))
        terms.append(0.5 * (dx + dy))
    return 0.5 * (terms[0] + terms[1])


def reg_loss(params):
    """Sum of per-parameter Euclidean norms (a norm sum, not a squared sum)."""
    total = None
    for p in params:
        n = ops.l2_norm(p.tensor)
        total = n if total is None else total + n
    if total is None:
        return Tensor(0.0)
    return total


def combine(weights, ssim, l1, con, tex, reg):
    """Weighted total; split out so the aggregation is testable on floats."""
    return (
        weights.ssim * ssim
        + weights.l1 * l1
        + weights.con * con
        + weights.tex * tex
        + weights.reg * reg
    )


def total_loss(pred, s0, dolp, params, weights=None):
    """Full objective; returns (float breakdown for logging, scalar Tensor)."""
    weights = weights or LossWeights()
    t_ssim = ssim_loss(pred, s0, dolp)
    t_l1 = l1_loss(pred, s0, dolp)
    t_con = contrast_loss(pred)
    t_tex = texture_loss(pred, s0, dolp)
    t_reg = reg_loss(params)
    total = combine(weights, t_ssim, t_l1, t_con, t_tex, t_reg)
    breakdown = LossBreakdown(
        ssim=t_ssim.item(), l1=t_l1.item(), con=t_con.item(),
        tex=t_tex.item(), reg=t_reg.item(), total=total.item(),
    )
    if not np.isfinite(breakdown.total):
        raise NumericError("non-finite training loss: %r" % (breakdown,))
    return breakdown, total
