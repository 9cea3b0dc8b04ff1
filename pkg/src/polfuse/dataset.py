"""On-disk dataset layout, deterministic splits, and training-pair loading.

A dataset root holds ``scene_NNNN/`` directories, each with the four
polarization-angle planes ``I000/I045/I090/I135`` (PNG or PGM) and
optionally precomputed ``S0/DOLP/AOP``.  Training pairs are always
recomputed from the angle planes so stored derivatives can never drift
from the raw data.
"""

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from . import imgio
from .errors import ChecksumError, DataError
from .ops import _reflect_indices
from .stokes import PolarizationStack, stokes_from_angles

REQUIRED_PLANES = ("I000", "I045", "I090", "I135")
DERIVED_PLANES = ("S0", "DOLP", "AOP")
PLANE_EXTENSIONS = (".png", ".pgm")
SCENE_PREFIX = "scene_"
MANIFEST_NAME = "manifest.txt"


@dataclass
class Scene:
    name: str
    planes: dict  # plane name -> absolute file path
    height: int
    width: int


def _find_plane(scene_dir, plane):
    for ext in PLANE_EXTENSIONS:
        path = os.path.join(scene_dir, plane + ext)
        if os.path.isfile(path):
            return path
    return None


def build_index(root):
    """Scan ``root`` for scenes; every plane must decode to one shared extent."""
    if not os.path.isdir(root):
        raise DataError("dataset root %s is not a directory" % root)
    scenes = []
    for entry in sorted(os.listdir(root)):
        scene_dir = os.path.join(root, entry)
        if not entry.startswith(SCENE_PREFIX) or not os.path.isdir(scene_dir):
            continue
        planes = {}
        shape = None
        for plane in REQUIRED_PLANES + DERIVED_PLANES:
            path = _find_plane(scene_dir, plane)
            if path is None:
                if plane in REQUIRED_PLANES:
                    raise DataError("scene %s is missing plane %s" % (entry, plane))
                continue
            img = imgio.read_gray(path)
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise DataError(
                    "scene %s: plane %s has extents %r, expected %r"
                    % (entry, plane, img.shape, shape)
                )
            planes[plane] = path
        scenes.append(Scene(name=entry, planes=planes, height=shape[0], width=shape[1]))
    if not scenes:
        raise DataError("no scene_* directories under %s" % root)
    return scenes


def split_scenes(scenes, seed, val_count):
    """Seeded random split; validation falls back to the train set when empty.

    At least one scene always remains in the train set, so val_count is
    capped at len(scenes) - 1.
    """
    n = len(scenes)
    if n == 0:
        raise DataError("cannot split an empty scene list")
    effective = min(val_count, n - 1) if n > 1 else 0
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    val = [scenes[i] for i in sorted(perm[:effective])]
    train = [scenes[i] for i in sorted(perm[effective:])]
    if not val:
        val = list(train)
    return train, val


def load_pair(scene):
    """Scene -> (normalized total intensity, degree of polarization), float64.

    The intensity sum of two orthogonal unit-range planes spans [0,2], so
    it is halved to land in the network's [0,1] input domain.
    """
    planes = {p: imgio.read_gray(scene.planes[p]) for p in REQUIRED_PLANES}
    stack = PolarizationStack(
        i0=planes["I000"], i45=planes["I045"],
        i90=planes["I090"], i135=planes["I135"],
    )
    products = stokes_from_angles(stack)
    return products.s0 / 2.0, products.dolp


def reflect_pad_to(img, min_h, min_w):
    """Center the image on a reflect-padded canvas of at least the given size."""
    h, w = img.shape
    pad_h = max(0, min_h - h)
    pad_w = max(0, min_w - w)
    if pad_h == 0 and pad_w == 0:
        return img
    top = pad_h // 2
    left = pad_w // 2
    rows = _reflect_indices(h, top, pad_h - top)
    cols = _reflect_indices(w, left, pad_w - left)
    return img[np.ix_(rows, cols)]


def random_crop_pair(s0, dolp, size, rng):
    """One aligned size x size crop from both planes (same window)."""
    s0 = reflect_pad_to(s0, size, size)
    dolp = reflect_pad_to(dolp, size, size)
    h, w = s0.shape
    y0 = int(rng.integers(0, h - size + 1))
    x0 = int(rng.integers(0, w - size + 1))
    return s0[y0 : y0 + size, x0 : x0 + size], dolp[y0 : y0 + size, x0 : x0 + size]


def epoch_rng(seed, epoch):
    """Per-epoch generator; (seed, epoch) fully determines shuffle and crops."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch]))


def file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.blake2b(fh.read(), digest_size=8).hexdigest()


def write_manifest(root, rel_paths):
    """Record extents and content digests for the given files under root."""
    lines = []
    for rel in sorted(rel_paths):
        full = os.path.join(root, rel)
        img = imgio.read_gray(full)
        lines.append("%s %d %d %s" % (rel, img.shape[1], img.shape[0], file_digest(full)))
    path = os.path.join(root, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def verify_manifest(root):
    """Re-hash every manifest entry; returns the number of verified files."""
    path = os.path.join(root, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError("cannot read manifest %s: %s" % (path, exc)) from None
    for line in lines:
        parts = line.split()
        if len(parts) != 4:
            raise DataError("malformed manifest line: %r" % line)
        rel, _, _, digest = parts
        full = os.path.join(root, rel)
        if not os.path.isfile(full):
            raise DataError("manifest names missing file %s" % rel)
        if file_digest(full) != digest:
            raise ChecksumError("manifest digest mismatch for %s" % rel)
    return len(lines)
