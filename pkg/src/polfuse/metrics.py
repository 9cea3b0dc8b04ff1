"""Six-metric evaluation suite for fused images against their two sources.

Everything here is plain float64 numpy on 2-D grayscale planes.  SSIM,
MS-SSIM and VIF operate on the float images scaled to [0,1]; SD, Q_MI and
Q_abf operate on 8-bit-quantized [0,255] planes.  Degenerate inputs raise
``MetricError`` instead of emitting NaN.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MetricError, ShapeError
from .losses import SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW, gaussian_window

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MS_SSIM_MIN_EXTENT = 176
VIF_WINDOWS = (11, 9, 7, 5)
VIF_NOISE_VAR = 2.0
VIF_EPS = 1e-10
QABF_G = (0.9994, -15.0, 0.5)   # (gamma, kappa, sigma) strength sigmoid
QABF_A = (0.9879, -22.0, 0.8)   # (gamma, kappa, sigma) orientation sigmoid
CSV_HEADER = "pair,ssim,vif,sd,ms_ssim,q_mi,q_abf"


@dataclass
class MetricReport:
    pair: str
    ssim: float
    vif: float
    sd: float
    ms_ssim: float
    q_mi: float
    q_abf: float

    def csv_row(self):
        return "%s,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f" % (
            self.pair, self.ssim, self.vif, self.sd,
            self.ms_ssim, self.q_mi, self.q_abf,
        )


def _as_plane(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError("%s must be a 2-D grayscale plane, got %r" % (name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise MetricError("%s contains non-finite values" % name)
    return arr


def _check_pair(fused, a, b):
    f = _as_plane(fused, "fused")
    pa = _as_plane(a, "source a")
    pb = _as_plane(b, "source b")
    if f.shape != pa.shape or f.shape != pb.shape:
        raise ShapeError(
            "metric inputs must share one shape, got %r / %r / %r"
            % (f.shape, pa.shape, pb.shape)
        )
    return f, pa, pb


def quantize8(x):
    """Clamp to [0,1] and round half-to-even onto the 0..255 integer scale."""
    arr = np.asarray(x, dtype=np.float64)
    return np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)


def _filter_valid(img, kernel):
    kh, kw = kernel.shape
    windows = np.lib.stride_tricks.sliding_window_view(img, (kh, kw))
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


def _ssim_components(x, y, window):
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    sig_x = _filter_valid(x * x, window) - mu_x * mu_x
    sig_y = _filter_valid(y * y, window) - mu_y * mu_y
    sig_xy = _filter_valid(x * y, window) - mu_x * mu_y
    lum = (2.0 * mu_x * mu_y + SSIM_C1) / (mu_x * mu_x + mu_y * mu_y + SSIM_C1)
    cs = (2.0 * sig_xy + SSIM_C2) / (sig_x + sig_y + SSIM_C2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def ssim_pair(x, y):
    """Mean SSIM between two planes (Gaussian 11x11, valid windows)."""
    if min(x.shape) < SSIM_WINDOW:
        raise MetricError("image smaller than the %d-px SSIM window" % SSIM_WINDOW)
    window = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    return _ssim_components(x, y, window)[0]


def metric_ssim(fused, a, b):
    f, pa, pb = _check_pair(fused, a, b)
    return 0.5 * (ssim_pair(f, pa) + ssim_pair(f, pb))


def _downsample2(x):
    h, w = x.shape
    x = x[: 2 * (h // 2), : 2 * (w // 2)]
    return x.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ms_ssim_pair(x, y):
    """Multi-scale SSIM; scales shrink (weights renormalized) on small images."""
    scales = len(MS_SSIM_WEIGHTS)
    extent = min(x.shape)
    while scales > 1 and extent < MS_SSIM_MIN_EXTENT // (2 ** (5 - scales)):
        scales -= 1
    if extent < SSIM_WINDOW:
        raise MetricError("image smaller than the %d-px SSIM window" % SSIM_WINDOW)
    weights = np.asarray(MS_SSIM_WEIGHTS[:scales], dtype=np.float64)
    weights = weights / weights.sum()
    window = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    value = 1.0
    for level in range(scales):
        ssim_full, cs = _ssim_components(x, y, window)
        term = ssim_full if level == scales - 1 else cs
        value *= max(term, 0.0) ** weights[level]
        if level != scales - 1:
            x = _downsample2(x)
            y = _downsample2(y)
    return float(value)


def metric_ms_ssim(fused, a, b):
    f, pa, pb = _check_pair(fused, a, b)
    return 0.5 * (ms_ssim_pair(f, pa) + ms_ssim_pair(f, pb))


def vif_pair(ref, dist):
    """Pixel-domain visual information fidelity of ``dist`` given ``ref``.

    Four scales; each level Gaussian-filters with a shrinking window
    (extent 11/9/7/5, sigma = extent/5) and decimates by two before the
    next.  Signal/noise ratios accumulate on the [0,255] intensity scale
    with additive noise variance 2.
    """
    ref = ref * 255.0
    dist = dist * 255.0
    num = 0.0
    den = 0.0
    for level, extent in enumerate(VIF_WINDOWS):
        window = gaussian_window(extent, extent / 5.0)
        if level > 0:
            if min(ref.shape) < extent:
                raise MetricError("image too small for VIF scale %d" % (level + 1,))
            ref = _filter_valid(ref, window)[::2, ::2]
            dist = _filter_valid(dist, window)[::2, ::2]
        if min(ref.shape) < extent:
            raise MetricError("image too small for VIF scale %d" % (level + 1,))
        mu1 = _filter_valid(ref, window)
        mu2 = _filter_valid(dist, window)
        var1 = np.maximum(_filter_valid(ref * ref, window) - mu1 * mu1, 0.0)
        var2 = np.maximum(_filter_valid(dist * dist, window) - mu2 * mu2, 0.0)
        cov = _filter_valid(ref * dist, window) - mu1 * mu2

        gain = cov / (var1 + VIF_EPS)
        noise = var2 - gain * cov
        flat_ref = var1 < VIF_EPS
        gain = np.where(flat_ref, 0.0, gain)
        noise = np.where(flat_ref, var2, noise)
        var1 = np.where(flat_ref, 0.0, var1)
        flat_dist = var2 < VIF_EPS
        gain = np.where(flat_dist, 0.0, gain)
        noise = np.where(flat_dist, 0.0, noise)
        negative = gain < 0.0
        noise = np.where(negative, var2, noise)
        gain = np.where(negative, 0.0, gain)
        noise = np.maximum(noise, VIF_EPS)

        num += float(np.sum(np.log2(1.0 + gain * gain * var1 / (noise + VIF_NOISE_VAR))))
        den += float(np.sum(np.log2(1.0 + var1 / VIF_NOISE_VAR)))
    if den <= 0.0:
        raise MetricError("reference carries no information at any VIF scale")
    return num / den


def metric_vif(fused, a, b):
    f, pa, pb = _check_pair(fused, a, b)
    return 0.5 * (vif_pair(pa, f) + vif_pair(pb, f))


def metric_sd(fused):
    f = _as_plane(fused, "fused")
    return float(np.std(quantize8(f).astype(np.float64)))


def _edge_strength_angle(img):
    padded = np.pad(img, 1, mode="reflect")
    kx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    gx = _filter_valid(padded, kx)
    gy = _filter_valid(padded, kx.T)
    return np.hypot(gx, gy), np.arctan2(gy, gx)


def _sigmoid_quality(x, params):
    gamma, kappa, sigma = params
    return gamma / (1.0 + np.exp(kappa * (x - sigma)))


def _edge_preservation(g_s, a_s, g_f, a_f):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(g_s > g_f, g_f / g_s, g_s / g_f)
    ratio = np.where((g_s == 0.0) & (g_f == 0.0), 1.0, np.nan_to_num(ratio))
    dawn = np.abs(a_s - a_f)
    dawn = np.minimum(dawn, np.pi - dawn)
    alpha = 1.0 - 2.0 * dawn / np.pi
    return _sigmoid_quality(ratio, QABF_G) * _sigmoid_quality(alpha, QABF_A)


def metric_qabf(fused, a, b):
    """Edge-preservation index: how much source edge content survives fusion."""
    f, pa, pb = _check_pair(fused, a, b)
    qf = quantize8(f).astype(np.float64)
    qa = quantize8(pa).astype(np.float64)
    qb = quantize8(pb).astype(np.float64)
    g_f, a_f = _edge_strength_angle(qf)
    g_a, a_a = _edge_strength_angle(qa)
    g_b, a_b = _edge_strength_angle(qb)
    q_af = _edge_preservation(g_a, a_a, g_f, a_f)
    q_bf = _edge_preservation(g_b, a_b, g_f, a_f)
    weight = g_a + g_b
    total = float(np.sum(weight))
    if total <= 0.0:
        raise MetricError("both sources are edge-free; Q_abf undefined")
    return float(np.sum(q_af * g_a + q_bf * g_b) / total)


def _entropy(counts):
    p = counts / counts.sum()
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log2(nz)))


def _mutual_information(x, y):
    joint = np.bincount(
        x.ravel().astype(np.int64) * 256 + y.ravel().astype(np.int64),
        minlength=256 * 256,
    ).astype(np.float64)
    hx = _entropy(np.bincount(x.ravel(), minlength=256).astype(np.float64))
    hy = _entropy(np.bincount(y.ravel(), minlength=256).astype(np.float64))
    hxy = _entropy(joint)
    return hx + hy - hxy


def metric_qmi(fused, a, b):
    """Mutual information carried from the sources, normalized by their entropy."""
    f, pa, pb = _check_pair(fused, a, b)
    qf = quantize8(f)
    qa = quantize8(pa)
    qb = quantize8(pb)
    h_a = _entropy(np.bincount(qa.ravel(), minlength=256).astype(np.float64))
    h_b = _entropy(np.bincount(qb.ravel(), minlength=256).astype(np.float64))
    if h_a + h_b == 0.0:
        raise MetricError("both sources are constant; Q_MI denominator is zero")
    return (_mutual_information(qf, qa) + _mutual_information(qf, qb)) / (h_a + h_b)


def evaluate_pair(fused, a, b, pair="pair"):
    """All six metrics for one fused image and its two sources."""
    f, pa, pb = _check_pair(fused, a, b)
    return MetricReport(
        pair=pair,
        ssim=metric_ssim(f, pa, pb),
        vif=metric_vif(f, pa, pb),
        sd=metric_sd(f),
        ms_ssim=metric_ms_ssim(f, pa, pb),
        q_mi=metric_qmi(f, pa, pb),
        q_abf=metric_qabf(f, pa, pb),
    )


def mean_report(reports):
    if not reports:
        raise MetricError("cannot aggregate an empty report list")
    return MetricReport(
        pair="mean",
        ssim=float(np.mean([r.ssim for r in reports])),
        vif=float(np.mean([r.vif for r in reports])),
        sd=float(np.mean([r.sd for r in reports])),
        ms_ssim=float(np.mean([r.ms_ssim for r in reports])),
        q_mi=float(np.mean([r.q_mi for r in reports])),
        q_abf=float(np.mean([r.q_abf for r in reports])),
    )


def reports_to_csv(reports):
    lines = [CSV_HEADER]
    lines.extend(r.csv_row() for r in reports)
    lines.append(mean_report(reports).csv_row())
    return "\n".join(lines) + "\n"


def write_csv(path, reports):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(reports_to_csv(reports))
