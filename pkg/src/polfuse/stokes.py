"""Stokes products from four-angle captures or DoFP mosaics.

Conventions: S0 = I0 + I90 (the horizontal/vertical pair; the four-angle
average (I0+I45+I90+I135)/2 is an equivalent estimate for ideal captures
but is not what this toolkit computes).  q and u are S1/S0 and S2/S0
with a small-S0 guard, DOLP is sqrt(q^2+u^2) clamped to [0,1], and AOP is
0.5*atan2(u, q) in (-pi/2, pi/2] with (q,u)=(0,0) mapping to 0.

S3 (circular polarization) is never populated: a linear DoFP capture
cannot measure it.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError
from .ops import bilinear_resize_np

EPS_S0 = 1e-6
ANGLES = (0, 45, 90, 135)
DEFAULT_PATTERN = ((90, 45), (135, 0))


def validate_pattern(pattern):
    try:
        cells = [int(pattern[r][c]) for r in range(2) for c in range(2)]
    except (TypeError, IndexError, ValueError):
        raise ValidationError("mosaic pattern must be a 2x2 grid of angles")
    if sorted(cells) != sorted(ANGLES):
        raise ValidationError(
            "mosaic pattern must contain each of %r exactly once, got %r" % (ANGLES, cells)
        )
    return ((cells[0], cells[1]), (cells[2], cells[3]))


@dataclass
class DofpMosaic:
    """Raw single-channel mosaic with its 2x2 angle layout."""

    data: np.ndarray
    pattern: tuple = DEFAULT_PATTERN

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ShapeError("mosaic must be a 2-d array")
        h, w = self.data.shape
        if h % 2 or w % 2:
            raise ValidationError("mosaic extents must be even, got %dx%d" % (h, w))
        self.pattern = validate_pattern(self.pattern)


@dataclass
class PolarizationStack:
    """Registered intensity planes at 0, 45, 90 and 135 degrees."""

    i0: np.ndarray
    i45: np.ndarray
    i90: np.ndarray
    i135: np.ndarray

    def __post_init__(self):
        planes = [np.asarray(p, dtype=np.float64) for p in (self.i0, self.i45, self.i90, self.i135)]
        shape = planes[0].shape
        for p in planes[1:]:
            if p.shape != shape:
                raise ShapeError("all four planes must share one shape")
        self.i0, self.i45, self.i90, self.i135 = planes

    def planes(self):
        return {0: self.i0, 45: self.i45, 90: self.i90, 135: self.i135}


@dataclass
class StokesProducts:
    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    q: np.ndarray
    u: np.ndarray
    dolp: np.ndarray
    aop: np.ndarray
    s3: None = field(default=None)  # linear capture only; never populated


def demosaic_dofp(mosaic):
    """Split a mosaic into four half-resolution planes and upsample back.

    Each angle's samples live at one fixed offset of every 2x2 cell; the
    sparse plane is recovered to full resolution bilinearly and clamped
    to [0, 1].
    """
    if not isinstance(mosaic, DofpMosaic):
        mosaic = DofpMosaic(np.asarray(mosaic))
    h, w = mosaic.data.shape
    by_angle = {}
    for r in range(2):
        for c in range(2):
            angle = mosaic.pattern[r][c]
            sub = mosaic.data[r::2, c::2]
            up = bilinear_resize_np(sub, h, w)
            by_angle[angle] = np.clip(up, 0.0, 1.0)
    return PolarizationStack(by_angle[0], by_angle[45], by_angle[90], by_angle[135])


def mosaic_from_stack(stack, pattern=DEFAULT_PATTERN):
    """Interleave four planes into a DoFP mosaic (synthesis helper)."""
    pattern = validate_pattern(pattern)
    planes = stack.planes()
    h, w = stack.i0.shape
    data = np.zeros((h, w), dtype=np.float64)
    for r in range(2):
        for c in range(2):
            data[r::2, c::2] = planes[pattern[r][c]][r::2, c::2]
    return DofpMosaic(data, pattern)


def stokes_from_angles(stack):
    """Compute S0/S1/S2, normalized q/u, DOLP and AOP for a stack.

    Intensities may exceed [0,1] (the ratios q, u, DOLP and AOP are scale
    free); pixels with S0 <= 1e-6 get q = u = 0.  DOLP above 1 (possible
    on noisy or inconsistent captures) is clamped; if the pre-clamp
    excess is larger than 0.1 a warning reports it.
    """
    s0 = stack.i0 + stack.i90
    s1 = stack.i0 - stack.i90
    s2 = stack.i45 - stack.i135
    lit = s0 > EPS_S0
    denom = np.where(lit, s0, 1.0)
    q = np.where(lit, s1 / denom, 0.0)
    u = np.where(lit, s2 / denom, 0.0)
    dolp_raw = np.sqrt(q * q + u * u)
    excess = float(dolp_raw.max(initial=0.0) - 1.0)
    if excess > 0.1:
        warnings.warn(
            "DOLP exceeded 1 by %.4f before clamping (noisy or inconsistent stack)" % excess,
            stacklevel=2,
        )
    dolp = np.clip(dolp_raw, 0.0, 1.0)
    aop = 0.5 * np.arctan2(u, q)
    return StokesProducts(s0=s0, s1=s1, s2=s2, q=q, u=u, dolp=dolp, aop=aop)


def to_display(plane, lo, hi):
    """Affine map [lo, hi] -> [0, 255] with clamping and half-even rounding."""
    if not lo < hi:
        raise ValidationError("display range requires lo < hi, got [%r, %r]" % (lo, hi))
    scaled = (np.asarray(plane, dtype=np.float64) - lo) * (255.0 / (hi - lo))
    return np.rint(np.clip(scaled, 0.0, 255.0)).astype(np.uint8)
