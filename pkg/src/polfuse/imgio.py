"""Grayscale image files: 8/16-bit PNG via Pillow, binary PGM by hand.

All readers return float64 planes normalized to [0,1] by the sample-type
maximum.  PGM (P5) samples above 8 bit are big-endian per the format's
convention; checkpoints and every other binary surface in this package
are little-endian.
"""

import re

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, ValidationError


def read_gray(path):
    """Read a grayscale PNG or PGM as float64 in [0,1]."""
    path = str(path)
    try:
        head = open(path, "rb").read(2)
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    if head == b"P5":
        return read_pgm(path)
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                return np.asarray(im, dtype=np.float64) / 255.0
            if im.mode in ("I", "I;16"):
                arr = np.asarray(im, dtype=np.float64)
                return arr / 65535.0
            raise DataError("unsupported image mode %r in %s" % (im.mode, path))
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError("cannot decode %s: %s" % (path, exc)) from exc


def write_png8(path, values):
    """Write uint8 values (or floats in [0,1], which are scaled) as PNG."""
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        arr = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(str(path), format="PNG")


def write_png16(path, values):
    """Write uint16 values (or floats in [0,1], scaled to 16 bit) as PNG."""
    arr = np.asarray(values)
    if arr.dtype != np.uint16:
        arr = np.rint(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(arr).save(str(path), format="PNG")


def write_pgm(path, values, maxval=65535):
    """Write a binary PGM (P5); samples big-endian when maxval > 255."""
    if not 0 < maxval < 65536:
        raise ValidationError("PGM maxval must be in [1, 65535]")
    arr = np.asarray(values)
    if arr.dtype.kind == "f":
        arr = np.rint(np.clip(arr, 0.0, 1.0) * maxval)
    arr = arr.astype(">u2" if maxval > 255 else "u1")
    h, w = arr.shape
    with open(str(path), "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(arr.tobytes())


_PGM_TOKEN = re.compile(rb"^(\s|#[^\n]*\n)*([0-9]+)")


def read_pgm(path):
    try:
        raw = open(str(path), "rb").read()
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    if not raw.startswith(b"P5"):
        raise DataError("not a binary PGM (P5): %s" % path)
    pos = 2
    fields = []
    for _ in range(3):
        m = _PGM_TOKEN.match(raw[pos:])
        if m is None:
            raise DataError("malformed PGM header in %s" % path)
        fields.append(int(m.group(2)))
        pos += m.end()
    w, h, maxval = fields
    if not 0 < maxval < 65536:
        raise DataError("PGM maxval out of range in %s" % path)
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    data = raw[pos : pos + need]
    if len(data) != need:
        raise DataError("truncated PGM payload in %s" % path)
    arr = np.frombuffer(data, dtype=dtype).reshape(h, w)
    return arr.astype(np.float64) / maxval
