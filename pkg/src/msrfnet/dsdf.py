"""
Dual-scale dense fusion block.

Two streams (high and low resolution, the low one at half the spatial size)
each run five CLR stages. Stage d of a stream sees its own history
M_{d-1}, ..., M_0 plus the previous output of the other stream, brought to its
resolution by a stride-2 transposed convolution (low -> high) or a stride-2
3x3 convolution (high -> low). Every cross-scale kernel is owned by its stage.

A 1x1 local-fusion convolution maps M_5 (k channels) back to the stream's
input channels before the scaled residual add X_out = X + w * fuse(M_5).
"""

from dataclasses import dataclass

from . import ops
from .blocks import clr, clr_param_shapes, conv, conv_param_shapes, conv_transpose, conv_transpose_param_shapes
from .errors import ConfigError, ShapeError

DEPTH = 5
STREAMS = ("h", "l")


@dataclass(frozen=True)
class DsdfConfig:
    ch_high: int
    ch_low: int
    k: int
    w: float = 0.4
    depth: int = DEPTH
    slope: float = 0.01

    def validate(self):
        if not 0.0 <= self.w <= 1.0:
            raise ConfigError(f"DSDF residual scale w must be in [0, 1], got {self.w}")
        if self.k < 1:
            raise ConfigError(f"DSDF growth factor k must be >= 1, got {self.k}")
        if self.depth != DEPTH:
            raise ConfigError(f"DSDF depth is fixed at {DEPTH}, got {self.depth}")
        if self.ch_high < 1 or self.ch_low < 1:
            raise ConfigError("DSDF stream channels must be >= 1")
        return self

    def channels(self, stream):
        return self.ch_high if stream == "h" else self.ch_low


def stage_sources(d, stream):
    """
    Names of the tensors concatenated, in order, to feed CLR stage `d` of
    `stream`: own previous output, the cross-scale term, then older history.
    """
    other = "l" if stream == "h" else "h"
    exchange = "up" if stream == "h" else "down"
    history = [f"M{j}{stream}" for j in range(d - 2, -1, -1)]
    return [f"M{d - 1}{stream}", f"{exchange}(M{d - 1}{other})"] + history


def stage_in_channels(cfg, d, stream):
    return cfg.channels(stream) + (d - 1) * cfg.k + cfg.k


def dsdf_param_shapes(cfg, prefix="dsdf"):
    cfg.validate()
    shapes = []
    for stream in STREAMS:
        other = "l" if stream == "h" else "h"
        for d in range(1, cfg.depth + 1):
            shapes += clr_param_shapes(
                f"{prefix}.{stream}.clr{d}", stage_in_channels(cfg, d, stream), cfg.k
            )
        for d in range(1, cfg.depth + 1):
            cross_in = cfg.channels(other) if d == 1 else cfg.k
            if stream == "h":
                shapes += conv_transpose_param_shapes(f"{prefix}.h.up{d}", cross_in, cfg.k)
            else:
                shapes += conv_param_shapes(f"{prefix}.l.down{d}", cross_in, cfg.k)
        shapes += conv_param_shapes(f"{prefix}.{stream}.fuse", cfg.k, cfg.channels(stream), k=1)
    return shapes


def _check_inputs(x_h, x_l, cfg):
    if x_h.ndim != 4 or x_l.ndim != 4:
        raise ShapeError("dsdf", "rank", 4, (x_h.ndim, x_l.ndim))
    for axis, dim in ((2, "H"), (3, "W")):
        if x_h.shape[axis] != 2 * x_l.shape[axis]:
            raise ShapeError("dsdf", f"{dim} (high / low = 2)", 2 * x_l.shape[axis], x_h.shape[axis])
    if x_h.shape[1] != cfg.ch_high:
        raise ShapeError("dsdf", "C (high stream)", cfg.ch_high, x_h.shape[1])
    if x_l.shape[1] != cfg.ch_low:
        raise ShapeError("dsdf", "C (low stream)", cfg.ch_low, x_l.shape[1])


def dsdf_forward(x_h, x_l, params, cfg, prefix="dsdf"):
    cfg.validate()
    _check_inputs(x_h, x_l, cfg)
    history = {"h": [x_h], "l": [x_l]}
    for d in range(1, cfg.depth + 1):
        cross = {
            "h": conv_transpose(history["l"][-1], params, f"{prefix}.h.up{d}"),
            "l": conv(history["h"][-1], params, f"{prefix}.l.down{d}", stride=2),
        }
        stage = {}
        for stream in STREAMS:
            own = history[stream]
            stage_input = ops.concat([own[-1], cross[stream]] + own[-2::-1])
            stage[stream] = clr(stage_input, params, f"{prefix}.{stream}.clr{d}", cfg.slope)
        for stream in STREAMS:
            history[stream].append(stage[stream])

    out = []
    for stream, x in (("h", x_h), ("l", x_l)):
        fused = conv(history[stream][-1], params, f"{prefix}.{stream}.fuse")
        out.append(ops.add_scaled(x, fused, cfg.w))
    return tuple(out)
