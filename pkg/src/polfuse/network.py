"""The luminance-aware multi-scale fusion network.

Data flow: the S0 and DOLP planes are concatenated, reflection-padded so
that three halvings still leave window-divisible extents, lifted to
feature space by the texture-fusion stem, pushed through a three-level
encoder whose stages are modulated by brightness weights derived from
DOLP, mixed globally by a windowed attention block at the bottleneck,
decoded back with hybrid upsampling and skip connections, luminance
corrected, and projected to one sigmoid channel that is cropped to the
input size.

Ablation flags remove whole submodules, so each flag combination has its
own parameter name-set.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Tensor
from .errors import NumericError, ShapeError, ValidationError
from .nn import (
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    LayerNorm,
    Linear,
    ModelParams,
    Module,
)


@dataclass
class NetworkConfig:
    base_channels: int = 64
    levels: int = 3
    window: int = 8
    heads: int = 4
    cbam_reduction: int = 16
    use_cbam: bool = True
    use_texture_block: bool = True
    use_brightness_branch: bool = True
    use_bright_enhance: bool = True

    def __post_init__(self):
        if self.levels != 3:
            raise ValidationError("the encoder depth is fixed at 3 levels")
        if self.base_channels < 1 or self.window < 1 or self.heads < 1:
            raise ValidationError("base_channels, window and heads must be positive")
        if self.base_channels % self.cbam_reduction:
            raise ValidationError(
                "base_channels (%d) must be divisible by cbam_reduction (%d)"
                % (self.base_channels, self.cbam_reduction)
            )
        if (4 * self.base_channels) % self.heads:
            raise ValidationError("bottleneck channels must be divisible by heads")

    @property
    def pad_unit(self):
        # three halvings, then the window must divide the bottleneck extents
        return (2 ** self.levels) * self.window


class ConvBNReLU(Module):
    def __init__(self, rng, cin, cout):
        super().__init__()
        self.conv = Conv2d(rng, cin, cout, 3, 1, 1, "reflect")
        self.bn = BatchNorm2d(cout)

    def __call__(self, x):
        return ops.relu(self.bn(self.conv(x)))


class DoubleConv(Module):
    def __init__(self, rng, cin, cout):
        super().__init__()
        self.conv1 = ConvBNReLU(rng, cin, cout)
        self.conv2 = ConvBNReLU(rng, cout, cout)

    def __call__(self, x):
        return self.conv2(self.conv1(x))


class ChannelAttention(Module):
    """Shared bottleneck MLP over pooled descriptors, sigmoid gate."""

    def __init__(self, rng, channels, reduction):
        super().__init__()
        self.fc1 = Linear(rng, channels, channels // reduction, bias=False)
        self.fc2 = Linear(rng, channels // reduction, channels, bias=False)
        self.channels = channels

    def __call__(self, x):
        b, c = x.shape[0], x.shape[1]
        avg = ops.reshape(ops.global_avg_pool(x), (b, c))
        mx = ops.reshape(ops.global_max_pool(x), (b, c))
        logits = ops.add(
            self.fc2(ops.relu(self.fc1(avg))),
            self.fc2(ops.relu(self.fc1(mx))),
        )
        gate = ops.reshape(ops.sigmoid(logits), (b, c, 1, 1))
        return ops.mul(x, gate)


class SpatialAttention(Module):
    """7x7 gate over the channel-wise average and maximum maps."""

    def __init__(self, rng):
        super().__init__()
        self.conv = Conv2d(rng, 2, 1, 7, 1, 3, "reflect", bias=False)

    def __call__(self, x):
        avg = ops.mean(x, axis=1, keepdims=True)
        mx = ops.amax(x, axis=1, keepdims=True)
        gate = ops.sigmoid(self.conv(ops.concat([avg, mx], 1)))
        return ops.mul(x, gate)


class CBAM(Module):
    """Channel attention first, spatial attention second."""

    def __init__(self, rng, channels, reduction):
        super().__init__()
        if channels % reduction:
            raise ValidationError("CBAM reduction must divide the channel count")
        self.channel = ChannelAttention(rng, channels, reduction)
        self.spatial = SpatialAttention(rng)

    def __call__(self, x):
        return self.spatial(self.channel(x))


class TextureFusion(Module):
    """Stem plus the residual texture block.

    x0 = stem(x); x1, x2 = successive conv-BN-ReLU; the attended sum
    x3 = CBAM(x1 + x2) re-enters through relu(x0 + x3).  Without the
    texture block the stem output passes through (gated by CBAM when that
    flag alone is on, so the attention module still has a place to act).
    """

    def __init__(self, rng, channels, config):
        super().__init__()
        self.stem = Conv2d(rng, 2, channels, 3, 1, 1, "reflect")
        self.use_texture = config.use_texture_block
        if self.use_texture:
            self.block1 = ConvBNReLU(rng, channels, channels)
            self.block2 = ConvBNReLU(rng, channels, channels)
        self.cbam = CBAM(rng, channels, config.cbam_reduction) if config.use_cbam else None

    def __call__(self, x):
        if x.shape[1] != 2:
            raise ShapeError("texture fusion expects 2 input channels")
        x0 = self.stem(x)
        if not self.use_texture:
            return self.cbam(x0) if self.cbam is not None else x0
        x1 = self.block1(x0)
        x2 = self.block2(x1)
        x3 = ops.add(x1, x2)
        if self.cbam is not None:
            x3 = self.cbam(x3)
        return ops.relu(ops.add(x0, x3))


class BrightnessBranch(Module):
    """Three-scale sigmoid weight maps computed from the DOLP plane."""

    def __init__(self, rng, c1, c2, c3):
        super().__init__()
        self.stage1 = ConvBNReLU(rng, 1, c1)
        self.stage2 = ConvBNReLU(rng, c1, c2)
        self.stage3 = ConvBNReLU(rng, c2, c3)
        self.head1 = Conv2d(rng, c1, 1, 1)
        self.head2 = Conv2d(rng, c2, 1, 1)
        self.head3 = Conv2d(rng, c3, 1, 1)

    def __call__(self, dolp):
        if dolp.shape[2] % 4 or dolp.shape[3] % 4:
            raise ShapeError("brightness branch needs extents divisible by 4")
        f1 = self.stage1(dolp)
        f2 = self.stage2(ops.avgpool2d(f1))
        f3 = self.stage3(ops.avgpool2d(f2))
        return (
            ops.sigmoid(self.head1(f1)),
            ops.sigmoid(self.head2(f2)),
            ops.sigmoid(self.head3(f3)),
        )


def inject_brightness(feat, weight):
    """Resize a 1-channel weight map to the feature extents and multiply."""
    if feat.shape[0] != weight.shape[0]:
        raise ShapeError("batch mismatch between feature and brightness weight")
    resized = ops.bilinear_resize(weight, feat.shape[2], feat.shape[3])
    return ops.mul(feat, resized)


def window_partition(x, ws):
    b, c, h, w = x.shape
    nh, nw = h // ws, w // ws
    t = ops.reshape(x, (b, c, nh, ws, nw, ws))
    t = ops.transpose(t, (0, 2, 4, 3, 5, 1))
    return ops.reshape(t, (b * nh * nw, ws * ws, c))


def window_merge(tokens, b, c, h, w, ws):
    nh, nw = h // ws, w // ws
    t = ops.reshape(tokens, (b, nh, nw, ws, ws, c))
    t = ops.transpose(t, (0, 5, 1, 3, 2, 4))
    return ops.reshape(t, (b, c, h, w))


class SwinBlock(Module):
    """Windowed multi-head self-attention plus MLP, pre-norm residuals.

    No positional encoding and no window shift; together with the
    order-canonical softmax/apply contractions this makes the attention
    sublayer exactly equivariant to token permutations within a window.
    """

    def __init__(self, rng, channels, window, heads):
        super().__init__()
        if channels % heads:
            raise ValidationError("attention heads must divide the channel count")
        self.ln1 = LayerNorm(channels)
        self.q = Linear(rng, channels, channels)
        self.k = Linear(rng, channels, channels)
        self.v = Linear(rng, channels, channels)
        self.proj = Linear(rng, channels, channels)
        self.ln2 = LayerNorm(channels)
        self.fc1 = Linear(rng, channels, 4 * channels)
        self.fc2 = Linear(rng, 4 * channels, channels)
        self.window = window
        self.heads = heads
        self.channels = channels

    def _split_heads(self, t):
        m, n, c = t.shape
        h = self.heads
        t = ops.reshape(t, (m, n, h, c // h))
        return ops.transpose(t, (0, 2, 1, 3))

    def _attention(self, tokens):
        m, n, c = tokens.shape
        q = self._split_heads(self.q(tokens))
        k = self._split_heads(self.k(tokens))
        v = self._split_heads(self.v(tokens))
        scale = 1.0 / math.sqrt(c // self.heads)
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), scale)
        attn = ops.softmax(scores, axis=-1)
        mixed = ops.attn_matmul(attn, v)
        mixed = ops.reshape(ops.transpose(mixed, (0, 2, 1, 3)), (m, n, c))
        return self.proj(mixed)

    def attention_sublayer(self, tokens):
        return ops.add(tokens, self._attention(self.ln1(tokens)))

    def mlp_sublayer(self, tokens):
        return ops.add(tokens, self.fc2(ops.relu(self.fc1(self.ln2(tokens)))))

    def __call__(self, x):
        b, c, h, w = x.shape
        ws = self.window
        if h % ws or w % ws:
            raise ShapeError("window %d does not divide extents %dx%d" % (ws, h, w))
        tokens = window_partition(x, ws)
        tokens = self.attention_sublayer(tokens)
        tokens = self.mlp_sublayer(tokens)
        return window_merge(tokens, b, c, h, w, ws)


class BrightEnhance(Module):
    """Luminance correction x * (1 + M) from a normalized reference map."""

    def __init__(self, rng, channels):
        super().__init__()
        self.conv1 = Conv2d(rng, channels + 1, channels, 3, 1, 1, "reflect")
        self.conv2 = Conv2d(rng, channels, channels, 3, 1, 1, "reflect")
        self.conv3 = Conv2d(rng, channels, 1, 3, 1, 1, "reflect")

    def __call__(self, x, b_nor):
        if b_nor.shape[2:] != x.shape[2:] or b_nor.shape[1] != 1:
            raise ShapeError("reference luminance map must be 1-channel at feature size")
        h = ops.concat([x, b_nor], 1)
        m = ops.sigmoid(self.conv3(ops.relu(self.conv2(ops.relu(self.conv1(h))))))
        return ops.mul(x, ops.add(m, 1.0))


def normalize_reference(b_ref):
    """Per-image min-max normalization of the reference luminance array.

    Runs outside the autodiff graph: the reference is a function of the
    network input only, so no gradient flows through it.
    """
    mn = b_ref.min(axis=(1, 2, 3), keepdims=True)
    mx = b_ref.max(axis=(1, 2, 3), keepdims=True)
    return (b_ref - mn) / (mx - mn + 1e-6)


class MLSN(Module):
    """Full fusion network; construction order fixes the parameter order."""

    def __init__(self, config, rng):
        super().__init__()
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(int(rng))
        self.config = config
        c1 = config.base_channels
        c2, c3 = 2 * c1, 4 * c1
        self.texture = TextureFusion(rng, c1, config)
        if config.use_brightness_branch:
            self.brightness = BrightnessBranch(rng, c1, c2, c3)
        else:
            self.brightness = None
        self.enc1 = DoubleConv(rng, c1, c1)
        self.enc2 = DoubleConv(rng, c1, c2)
        self.enc3 = DoubleConv(rng, c2, c3)
        self.bottleneck = DoubleConv(rng, c3, c3)
        self.swin = SwinBlock(rng, c3, config.window, config.heads)
        self.up1 = ConvTranspose2d(rng, c3, c3, 2)
        self.dec1 = DoubleConv(rng, c3 + c3, c2)
        self.up2 = ConvTranspose2d(rng, c2, c2, 2)
        self.dec2 = DoubleConv(rng, c2 + c2, c1)
        self.up3 = ConvTranspose2d(rng, c1, c1, 2)
        self.dec3 = DoubleConv(rng, c1 + c1, c1)
        if config.use_bright_enhance:
            self.enhance = BrightEnhance(rng, c1)
        else:
            self.enhance = None
        self.head = Conv2d(rng, c1, 1, 1)

    def model_params(self):
        return ModelParams(self)

    def _hybrid_up(self, x, deconv):
        up_a = deconv(x)
        up_b = ops.bilinear_resize(x, 2 * x.shape[2], 2 * x.shape[3])
        return ops.mul(ops.add(up_a, up_b), 0.5)

    def __call__(self, s0, dolp):
        if s0.shape != dolp.shape:
            raise ShapeError("S0 and DOLP inputs must share one shape")
        if s0.ndim != 4 or s0.shape[1] != 1:
            raise ShapeError("inputs must be B x 1 x H x W")
        b, _, h, w = s0.shape
        unit = self.config.pad_unit
        hp = -(-h // unit) * unit
        wp = -(-w // unit) * unit
        pt, pl = (hp - h) // 2, (wp - w) // 2
        pb, pr = hp - h - pt, wp - w - pl

        x = ops.pad_reflect2d(ops.concat([s0, dolp], 1), pt, pb, pl, pr)
        dolp_p = ops.pad_reflect2d(dolp, pt, pb, pl, pr)

        t = self.texture(x)
        weights = self.brightness(dolp_p) if self.brightness is not None else None

        e1 = self.enc1(t)
        if weights is not None:
            e1 = inject_brightness(e1, weights[0])
        e2 = self.enc2(ops.maxpool2d(e1))
        if weights is not None:
            e2 = inject_brightness(e2, weights[1])
        e3 = self.enc3(ops.maxpool2d(e2))
        if weights is not None:
            e3 = inject_brightness(e3, weights[2])

        bott = self.swin(self.bottleneck(ops.maxpool2d(e3)))

        d1 = self.dec1(ops.concat([self._hybrid_up(bott, self.up1), e3], 1))
        d2 = self.dec2(ops.concat([self._hybrid_up(d1, self.up2), e2], 1))
        d3 = self.dec3(ops.concat([self._hybrid_up(d2, self.up3), e1], 1))

        if self.enhance is not None:
            b_nor = Tensor(normalize_reference(dolp_p.data), dtype=d3.dtype.type)
            d3 = self.enhance(d3, b_nor)

        out = ops.sigmoid(self.head(d3))
        out = ops.crop2d(out, pt, pl, h, w)
        if not np.all(np.isfinite(out.data)):
            raise NumericError("non-finite values in network output")
        return out
