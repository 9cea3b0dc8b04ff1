"""Shared test utilities: synthetic images, scene fixtures, and
independent metric/gradient oracles implemented with deliberately
different primitives than the library code they check.
"""

import os

import numpy as np

from polfuse import imgio

MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def natural_image(seed, size=192):
    """Non-constant test image: smooth waves + sharp shapes + mild noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size))
    for _ in range(6):
        fx, fy = rng.uniform(0.5, 4, 2)
        ph = rng.uniform(0, 1, 2)
        img += rng.uniform(0.2, 1.0) * np.cos(2 * np.pi * (fx * xx + ph[0])) \
            * np.cos(2 * np.pi * (fy * yy + ph[1]))
    for _ in range(8):
        cy, cx = rng.integers(0, size, 2)
        r = int(rng.integers(2, max(3, size // 4)))
        val = rng.uniform(-1, 1)
        if rng.random() < 0.5:
            img[max(0, cy - r) : cy + r, max(0, cx - r) : cx + r] += val
        else:
            img[(yy * size - cy) ** 2 + (xx * size - cx) ** 2 < r * r] += val
    img += rng.normal(0, 0.02, img.shape)
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def polarized_planes(seed, size):
    """Physically consistent angle planes (i0+i90 == i45+i135 == intensity)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = 0.5 + 0.25 * np.cos(2 * np.pi * xx * rng.uniform(1, 4)) \
        * np.cos(2 * np.pi * yy * rng.uniform(1, 4))
    base[size // 5 : size // 2, size // 8 : 3 * size // 4] += 0.15
    base = np.clip(base, 0.05, 0.95)
    dolp = np.clip(0.4 + 0.35 * np.sin(2 * np.pi * yy * 3), 0.0, 0.85)
    aop = 0.2 + 0.3 * xx
    return {
        "I000": 0.5 * base * (1 + dolp * np.cos(2 * aop)),
        "I090": 0.5 * base * (1 - dolp * np.cos(2 * aop)),
        "I045": 0.5 * base * (1 + dolp * np.sin(2 * aop)),
        "I135": 0.5 * base * (1 - dolp * np.sin(2 * aop)),
    }


def write_scene(root, index, seed, size=96):
    scene_dir = os.path.join(root, "scene_%04d" % index)
    os.makedirs(scene_dir, exist_ok=True)
    for name, plane in polarized_planes(seed, size).items():
        imgio.write_png16(os.path.join(scene_dir, name + ".png"), plane)
    return scene_dir


def make_dataset(root, count, size=96, seed=0):
    for k in range(count):
        write_scene(root, k, seed + k, size)
    return root


def correlated_planes(seed, size):
    """Angle planes of a scene whose polarization follows the intensity.

    The degree of polarization is a monotone rescaling of the intensity
    field, as on smooth dielectric surfaces where shading and
    polarization share the same geometry.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = 0.5 + 0.3 * np.cos(2 * np.pi * xx * rng.uniform(1, 3)) \
        * np.cos(2 * np.pi * yy * rng.uniform(1, 3))
    base[size // 5 : size // 2, size // 8 : 3 * size // 4] += 0.2
    base = np.clip(base, 0.05, 0.95)
    span = base.max() - base.min()
    dolp = np.clip(0.1 + 0.75 * (base - base.min()) / span, 0.0, 0.85)
    aop = 0.2 + 0.3 * xx
    return {
        "I000": 0.5 * base * (1 + dolp * np.cos(2 * aop)),
        "I090": 0.5 * base * (1 - dolp * np.cos(2 * aop)),
        "I045": 0.5 * base * (1 + dolp * np.sin(2 * aop)),
        "I135": 0.5 * base * (1 - dolp * np.sin(2 * aop)),
    }


def make_correlated_dataset(root, count, size=64, seed=100):
    for k in range(count):
        scene_dir = os.path.join(root, "scene_%04d" % k)
        os.makedirs(scene_dir, exist_ok=True)
        for name, plane in correlated_planes(seed + k, size).items():
            imgio.write_png16(os.path.join(scene_dir, name + ".png"), plane)
    return root


def gauss2d(n, sigma):
    half = (n - 1) / 2.0
    g = np.exp(-((np.arange(n) - half) ** 2) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def scalar_ssim_stats(x, y, window=None):
    """Per-window SSIM/contrast-structure means computed window by window."""
    if window is None:
        window = gauss2d(11, 1.5)
    n = window.shape[0]
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    h, w = x.shape
    ssim_sum = 0.0
    cs_sum = 0.0
    count = 0
    for i in range(h - n + 1):
        for j in range(w - n + 1):
            wx = x[i : i + n, j : j + n]
            wy = y[i : i + n, j : j + n]
            mx = float(np.sum(wx * window))
            my = float(np.sum(wy * window))
            sx = float(np.sum(wx * wx * window)) - mx * mx
            sy = float(np.sum(wy * wy * window)) - my * my
            sxy = float(np.sum(wx * wy * window)) - mx * my
            lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
            cs = (2 * sxy + c2) / (sx + sy + c2)
            ssim_sum += lum * cs
            cs_sum += cs
            count += 1
    return ssim_sum / count, cs_sum / count


def scalar_ssim(x, y):
    return scalar_ssim_stats(x, y)[0]


def scalar_ms_ssim(x, y):
    scales = 5
    extent = min(x.shape)
    while scales > 1 and extent < 176 // (2 ** (5 - scales)):
        scales -= 1
    weights = np.asarray(MS_WEIGHTS[:scales])
    weights = weights / weights.sum()
    value = 1.0
    for level in range(scales):
        ssim_full, cs = scalar_ssim_stats(x, y)
        term = ssim_full if level == scales - 1 else cs
        value *= max(term, 0.0) ** weights[level]
        if level != scales - 1:
            h, w = x.shape
            x = x[: 2 * (h // 2), : 2 * (w // 2)]
            x = 0.25 * (x[0::2, 0::2] + x[0::2, 1::2] + x[1::2, 0::2] + x[1::2, 1::2])
            y = y[: 2 * (h // 2), : 2 * (w // 2)]
            y = 0.25 * (y[0::2, 0::2] + y[0::2, 1::2] + y[1::2, 0::2] + y[1::2, 1::2])
    return value


def central_diff(scalar_fn, arr, index, h=1e-6):
    up = arr.copy()
    up[index] += h
    down = arr.copy()
    down[index] -= h
    return (scalar_fn(up) - scalar_fn(down)) / (2.0 * h)


def max_rel_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)
