"""
Composite layers built from `msrfnet.ops`.

Each block comes as a pair: `<block>_param_shapes(prefix, ...)` lists the
(name, shape) entries the block owns under `prefix`, and the forward function
looks those names up in a ParamStore.
"""

from . import ops
from .errors import ConfigError, ShapeError, UsageError


def conv_param_shapes(prefix, cin, cout, k=3):
    return [(f"{prefix}.w", (cout, cin, k, k)), (f"{prefix}.b", (cout,))]


def conv_transpose_param_shapes(prefix, cin, cout, k=3):
    return [(f"{prefix}.w", (cin, cout, k, k)), (f"{prefix}.b", (cout,))]


def conv(x, params, prefix, stride=1):
    return ops.conv2d(x, params[f"{prefix}.w"], params[f"{prefix}.b"], stride=stride)


def conv_transpose(x, params, prefix, stride=2):
    return ops.conv_transpose2d(x, params[f"{prefix}.w"], params[f"{prefix}.b"], stride=stride)


def clr_param_shapes(prefix, cin, cout):
    return conv_param_shapes(prefix, cin, cout, k=3)


def clr(x, params, prefix, slope=0.01):
    """3x3 same convolution followed by LeakyReLU."""
    return ops.leaky_relu(conv(x, params, prefix), slope)


# --- squeeze and excitation -------------------------------------------------


def se_param_shapes(prefix, channels, reduction=8):
    if reduction < 1 or channels % reduction:
        raise ConfigError(
            f"{prefix}: squeeze-excitation needs channels ({channels}) divisible by "
            f"reduction ({reduction})"
        )
    hidden = channels // reduction
    return [
        (f"{prefix}.fc1.w", (hidden, channels)),
        (f"{prefix}.fc1.b", (hidden,)),
        (f"{prefix}.fc2.w", (channels, hidden)),
        (f"{prefix}.fc2.b", (channels,)),
    ]


def se_scales(x, params, prefix):
    """Per-channel excitation weights in (0, 1), shaped [N,C,1,1]."""
    n, c = x.shape[:2]
    squeezed = ops.global_avg_pool(x)
    hidden = ops.relu(ops.linear(squeezed, params[f"{prefix}.fc1.w"], params[f"{prefix}.fc1.b"]))
    excited = ops.sigmoid(ops.linear(hidden, params[f"{prefix}.fc2.w"], params[f"{prefix}.fc2.b"]))
    return ops.reshape(excited, (n, c, 1, 1))


def se_block(x, params, prefix):
    return ops.hadamard(x, se_scales(x, params, prefix))


# --- residual block and shape-stream gate -----------------------------------


def residual_block_param_shapes(prefix, channels):
    return clr_param_shapes(f"{prefix}.clr1", channels, channels) + clr_param_shapes(
        f"{prefix}.clr2", channels, channels
    )


def residual_block(x, params, prefix, slope=0.01):
    """x + CLR(CLR(x))"""
    inner = clr(clr(x, params, f"{prefix}.clr1", slope), params, f"{prefix}.clr2", slope)
    return ops.add(x, inner)


def gated_conv_param_shapes(prefix, shape_channels, feature_channels):
    return conv_param_shapes(
        f"{prefix}.gate", shape_channels + feature_channels, 1, k=1
    ) + residual_block_param_shapes(f"{prefix}.rb", shape_channels)


def gated_conv(s, x, params, prefix, slope=0.01):
    """
    One gated convolution of the shape stream.

    `x` must already be resized to the spatial size of `s`. Returns the next
    shape-stream state RB(s * alpha) and the attention map alpha[N,1,H,W].
    """
    if s.shape[2:] != x.shape[2:]:
        raise UsageError(
            f"gated_conv: features are {list(x.shape[2:])} but the shape stream is "
            f"{list(s.shape[2:])}; resize the features first"
        )
    alpha = ops.sigmoid(conv(ops.concat([s, x]), params, f"{prefix}.gate"))
    return residual_block(ops.hadamard(s, alpha), params, f"{prefix}.rb", slope), alpha


# --- attention gate ----------------------------------------------------------


def attention_gate_param_shapes(prefix, skip_channels, decoder_channels, inter_channels=None):
    g = inter_channels or decoder_channels
    return (
        conv_param_shapes(f"{prefix}.theta", skip_channels, g, k=1)
        + conv_param_shapes(f"{prefix}.phi", decoder_channels, g, k=1)
        + conv_param_shapes(f"{prefix}.psi", g, 1, k=1)
        + conv_transpose_param_shapes(f"{prefix}.omega", 1, 1, k=3)
    )


def attention_gate_map(x, d_minus, params, prefix):
    """sigmoid(psi(relu(theta(x) + phi(d_minus)))) at the resolution of d_minus."""
    for axis, dim in ((2, "H"), (3, "W")):
        if x.shape[axis] != 2 * d_minus.shape[axis]:
            raise ShapeError("attention_gate", dim, 2 * d_minus.shape[axis], x.shape[axis])
    theta = conv(x, params, f"{prefix}.theta", stride=2)
    phi = conv(d_minus, params, f"{prefix}.phi")
    return ops.sigmoid(conv(ops.relu(ops.add(theta, phi)), params, f"{prefix}.psi"))


def attention_gate(x, d_minus, params, prefix):
    """Attention coefficients D_AG[N,1,H,W] at the resolution of the skip tensor x."""
    return conv_transpose(attention_gate_map(x, d_minus, params, prefix), params, f"{prefix}.omega")
