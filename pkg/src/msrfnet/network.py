"""
The full segmentation network.

    image -> encoder E1..E4 -> MSRF sub-network -> decoder D2 -> D3 -> D4 -> head
                                      |                                      ^
                                      +-> gated shape stream -> edge map ----+

D2 takes the scale-3 sub-network output as its skip tensor and the scale-4
output as its previous-decoder input; D3 and D4 continue up the pyramid. Two
deep-supervision heads tap D2 and D3. The shape-stream features are merged
with D4's output before the last CLR of the prediction head.
"""

from dataclasses import dataclass, fields
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy import ndimage

from . import ops
from .blocks import (
    attention_gate,
    attention_gate_param_shapes,
    clr,
    clr_param_shapes,
    conv,
    conv_param_shapes,
    conv_transpose,
    conv_transpose_param_shapes,
    gated_conv,
    gated_conv_param_shapes,
    se_block,
    se_param_shapes,
)
from .errors import ConfigError, ShapeError
from .losses import LOSS_MODES, LossWeights
from .subnet import VARIANTS, MsrfWiring, default_layers, msrf_ablation_variants, msrf_forward, msrf_param_shapes
from .tensor import DTYPES

SHAPE_SOURCES = ("msrf", "encoder")


@dataclass
class MsrfNetConfig:
    height: int = 64
    width: int = 64
    in_channels: int = 1
    widths: tuple = (8, 16, 32, 64)
    growth: tuple = (16, 32, 64)
    n_layers: int = 6
    dropout: float = 0.2
    w: float = 0.4
    leaky_slope: float = 0.01
    se_reduction: int = 8
    shape_channels: int = 8
    shape_stream: bool = True
    deep_supervision: bool = True
    decoder_attention: bool = True
    subnet_variant: str = "full"
    shape_stream_source: str = "msrf"
    loss_mode: str = "both"
    lambda1: float = 1.0
    lambda2: float = 1.0
    alpha: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    gamma: float = 1.0
    dtype: str = "float64"

    def validate(self):
        for dim in ("height", "width"):
            size = getattr(self, dim)
            if size < 8 or size % 8:
                raise ConfigError(f"{dim} must be a positive multiple of 8, got {size}")
        if self.in_channels < 1:
            raise ConfigError(f"in_channels must be >= 1, got {self.in_channels}")
        if len(self.widths) != 4 or any(c < 1 for c in self.widths):
            raise ConfigError(f"widths needs four channel counts >= 1, got {self.widths}")
        for c in self.widths:
            if c % self.se_reduction:
                raise ConfigError(
                    f"encoder width {c} is not divisible by se_reduction {self.se_reduction}"
                )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.shape_channels < 1:
            raise ConfigError(f"shape_channels must be >= 1, got {self.shape_channels}")
        if self.subnet_variant not in VARIANTS:
            raise ConfigError(f"unknown subnet_variant '{self.subnet_variant}', expected one of {VARIANTS}")
        if self.shape_stream_source not in SHAPE_SOURCES:
            raise ConfigError(
                f"unknown shape_stream_source '{self.shape_stream_source}', expected one of {SHAPE_SOURCES}"
            )
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"unknown loss_mode '{self.loss_mode}', expected one of {LOSS_MODES}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(DTYPES)}, got '{self.dtype}'")
        if self.leaky_slope < 0:
            raise ConfigError(f"leaky_slope must be >= 0, got {self.leaky_slope}")
        self.wiring().validate()
        self.loss_weights().validate()
        return self

    def wiring(self):
        base = MsrfWiring(layers=default_layers(self.n_layers), growth=tuple(self.growth), w=self.w)
        return msrf_ablation_variants(base, self.subnet_variant)

    def loss_weights(self):
        return LossWeights(**{f.name: getattr(self, f.name) for f in fields(LossWeights)})


class NetOutputs(NamedTuple):
    pred: object
    ds0: object
    ds1: object
    edge: Optional[object]


# --- encoder -----------------------------------------------------------------


def encoder_param_shapes(cfg):
    shapes = []
    cin = cfg.in_channels
    for i, c in enumerate(cfg.widths, start=1):
        shapes += clr_param_shapes(f"enc{i}.clr1", cin, c)
        shapes += clr_param_shapes(f"enc{i}.clr2", c, c)
        shapes += se_param_shapes(f"enc{i}.se", c, cfg.se_reduction)
        cin = c
    return shapes


def encoder_forward(image, params, cfg, training=False, rng=None):
    """E_i = SE(CLR(CLR(x))); the next block sees dropout(maxpool(E_i))."""
    outputs = []
    x = image
    for i in range(1, 5):
        if i > 1:
            x = ops.dropout(ops.maxpool2(x), cfg.dropout, training, rng)
        x = clr(x, params, f"enc{i}.clr1", cfg.leaky_slope)
        x = clr(x, params, f"enc{i}.clr2", cfg.leaky_slope)
        x = se_block(x, params, f"enc{i}.se")
        outputs.append(x)
    return outputs


# --- shape stream ------------------------------------------------------------


def sobel_magnitude(image):
    """
    Gradient magnitude of the mean intensity channel, scaled per image to
    [0, 1]. Returns a constant Tensor[N,1,H,W].
    """
    data = np.asarray(getattr(image, "data", image))
    intensity = data.mean(axis=1)
    out = np.zeros((data.shape[0], 1) + data.shape[2:], dtype=data.dtype)
    for n, img in enumerate(intensity):
        magnitude = np.hypot(
            ndimage.sobel(img, axis=0, mode="reflect"), ndimage.sobel(img, axis=1, mode="reflect")
        )
        peak = magnitude.max()
        if peak > 0:
            out[n, 0] = magnitude / peak
    return ops.constant(out)


def shape_stream_param_shapes(cfg):
    cs = cfg.shape_channels
    shapes = conv_param_shapes("shape.proj", cfg.widths[0], cs, k=1)
    for j in (2, 3, 4):
        shapes += gated_conv_param_shapes(f"shape.gate{j}", cs, cfg.widths[j - 1])
    shapes += conv_param_shapes("shape.edge", cs, 1, k=1)
    shapes += conv_param_shapes("shape.feat", 2, cs, k=1)
    return shapes


def shape_stream_forward(features, image, params, cfg):
    """
    Gated shape stream over four scale tensors. Returns the edge map
    [N,1,H,W] in (0, 1) and the shape features [N,Cs,H,W].
    """
    h, w = features[0].shape[2:]
    s = conv(features[0], params, "shape.proj")
    for j in (2, 3, 4):
        x = ops.bilinear_upsample(features[j - 1], h, w)
        s, _ = gated_conv(s, x, params, f"shape.gate{j}", cfg.leaky_slope)
    edge = ops.sigmoid(conv(s, params, "shape.edge"))
    merged = ops.concat([edge, sobel_magnitude(image)])
    shape_features = ops.leaky_relu(conv(merged, params, "shape.feat"), cfg.leaky_slope)
    return edge, shape_features


# --- decoder -----------------------------------------------------------------


def decoder_param_shapes(prefix, skip_channels, prev_channels, cfg):
    c = skip_channels
    shapes = conv_transpose_param_shapes(f"{prefix}.up", prev_channels, c)
    if cfg.decoder_attention:
        shapes += se_param_shapes(f"{prefix}.se", c, cfg.se_reduction)
        shapes += conv_param_shapes(f"{prefix}.spatial", c, 1, k=1)
        shapes += attention_gate_param_shapes(f"{prefix}.ag", c, prev_channels)
        shapes += clr_param_shapes(f"{prefix}.clr1", 3 * c, c)
    else:
        shapes += clr_param_shapes(f"{prefix}.clr1", 2 * c, c)
    shapes += clr_param_shapes(f"{prefix}.clr2", c, c)
    return shapes


def decoder_block_forward(x, d_minus, params, prefix, cfg):
    """
    Triple-attention decoder block at the resolution of the skip tensor `x`:

        D_sc  = (sigmoid(conv1x1(x)) + 1) * SE(x)
        D_ag  = (AG(x, D-) * x) ++ up(D-)
        out   = CLR(CLR(D_sc ++ D_ag))

    Without attention the block is CLR(CLR(x ++ up(D-))).
    """
    for axis, dim in ((2, "H"), (3, "W")):
        if x.shape[axis] != 2 * d_minus.shape[axis]:
            raise ShapeError(prefix, dim, 2 * d_minus.shape[axis], x.shape[axis])
    up = conv_transpose(d_minus, params, f"{prefix}.up")
    if cfg.decoder_attention:
        spatial = ops.sigmoid(conv(x, params, f"{prefix}.spatial"))
        d_sc = ops.hadamard(ops.add_scalar(spatial, 1.0), se_block(x, params, f"{prefix}.se"))
        gate = attention_gate(x, d_minus, params, f"{prefix}.ag")
        merged = ops.concat([d_sc, ops.hadamard(gate, x), up])
    else:
        merged = ops.concat([x, up])
    out = clr(merged, params, f"{prefix}.clr1", cfg.leaky_slope)
    return clr(out, params, f"{prefix}.clr2", cfg.leaky_slope)


# --- heads and assembly -------------------------------------------------------


def head_param_shapes(cfg):
    c1, c2, c3, _ = cfg.widths
    shapes = conv_param_shapes("head.ds0", c3, 1, k=1)
    shapes += conv_param_shapes("head.ds1", c2, 1, k=1)
    extra = cfg.shape_channels if cfg.shape_stream else 0
    shapes += clr_param_shapes("head.clr", c1 + extra, c1)
    shapes += conv_param_shapes("head.out", c1, 1, k=1)
    return shapes


def network_param_shapes(cfg):
    cfg.validate()
    c1, c2, c3, c4 = cfg.widths
    shapes = encoder_param_shapes(cfg)
    shapes += msrf_param_shapes(cfg.wiring(), cfg.widths)
    if cfg.shape_stream:
        shapes += shape_stream_param_shapes(cfg)
    shapes += decoder_param_shapes("dec2", c3, c4, cfg)
    shapes += decoder_param_shapes("dec3", c2, c3, cfg)
    shapes += decoder_param_shapes("dec4", c1, c2, cfg)
    shapes += head_param_shapes(cfg)
    return shapes


def _deep_supervision_head(x, params, prefix, height, width):
    return ops.bilinear_upsample(ops.sigmoid(conv(x, params, prefix)), height, width)


def msrfnet_forward(image, params, cfg, training=False, rng=None):
    expected = (cfg.in_channels, cfg.height, cfg.width)
    if image.ndim != 4 or tuple(image.shape[1:]) != expected:
        raise ShapeError("msrfnet_forward", "[C,H,W]", list(expected), list(image.shape[1:]))

    encoded = encoder_forward(image, params, cfg, training, rng)
    fused = msrf_forward(encoded, params, cfg.wiring(), cfg.leaky_slope)

    edge = shape_features = None
    if cfg.shape_stream:
        source = fused if cfg.shape_stream_source == "msrf" else encoded
        edge, shape_features = shape_stream_forward(source, image, params, cfg)

    d2 = decoder_block_forward(fused[2], fused[3], params, "dec2", cfg)
    d3 = decoder_block_forward(fused[1], d2, params, "dec3", cfg)
    d4 = decoder_block_forward(fused[0], d3, params, "dec4", cfg)

    ds0 = _deep_supervision_head(d2, params, "head.ds0", cfg.height, cfg.width)
    ds1 = _deep_supervision_head(d3, params, "head.ds1", cfg.height, cfg.width)

    top = d4 if shape_features is None else ops.concat([d4, shape_features])
    top = clr(top, params, "head.clr", cfg.leaky_slope)
    pred = ops.sigmoid(conv(top, params, "head.out"))
    return NetOutputs(pred, ds0, ds1, edge)


def param_count_table(cfg):
    """Parameter tensors and scalar counts per top-level module, plus a total row."""
    rows = {}
    for name, shape in network_param_shapes(cfg):
        module = name.split(".")[0]
        tensors, count = rows.get(module, (0, 0))
        rows[module] = (tensors + 1, count + int(np.prod(shape)))
    df = pd.DataFrame(
        [(module, t, c) for module, (t, c) in rows.items()],
        columns=["module", "tensors", "parameters"],
    )
    total = pd.DataFrame(
        [("total", int(df["tensors"].sum()), int(df["parameters"].sum()))], columns=df.columns
    )
    return pd.concat([df, total], ignore_index=True)
