"""
Differentiable primitives over `Tensor`.

Convolutions lower to matrix products over im2col columns, one product per
batch element through `map_batch`. Weight gradients are summed in batch order,
so results do not depend on the thread cap.

Padding convention for "same": symmetric zero padding, the odd extra pixel
goes to the bottom/right.
"""

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ShapeError, UsageError
from .tensor import Tensor, map_batch, ordered_sum, record


def _expect_rank(op, x, rank):
    if x.ndim != rank:
        raise ShapeError(op, "rank", rank, x.ndim)


def _check_stride(op, stride):
    if stride < 1:
        raise ConfigError(f"{op}: stride must be >= 1, got {stride}")


def _same_padding(size, kernel, stride):
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, "broadcast", list(a.shape), list(b.shape)) from None


# --- convolutions -----------------------------------------------------------


def _im2col(xp, kh, kw, stride, oh, ow):
    """xp[C,Hp,Wp] -> cols[C*kh*kw, oh*ow], rows ordered (c, a, b)."""
    c = xp.shape[0]
    if kh == kw == 1 and stride == 1 and xp.shape[1:] == (oh, ow):
        return xp.reshape(c, oh * ow)
    cols = np.empty((c, kh, kw, oh, ow), dtype=xp.dtype)
    for a in range(kh):
        for b in range(kw):
            cols[:, a, b] = xp[:, a : a + stride * oh : stride, b : b + stride * ow : stride]
    return cols.reshape(c * kh * kw, oh * ow)


def _col2im(cols, shape, kh, kw, stride, oh, ow):
    """Adjoint of _im2col: cols[C*kh*kw, oh*ow] summed back into an array of `shape`."""
    c = shape[0]
    if kh == kw == 1 and stride == 1 and tuple(shape[1:]) == (oh, ow):
        return cols.reshape(shape)
    cols = cols.reshape(c, kh, kw, oh, ow)
    out = np.zeros(shape, dtype=cols.dtype)
    for a in range(kh):
        for b in range(kw):
            out[:, a : a + stride * oh : stride, b : b + stride * ow : stride] += cols[:, a, b]
    return out


def conv2d(x, weight, bias=None, stride=1, padding="same"):
    """Cross-correlation of x[N,Cin,H,W] with weight[Cout,Cin,kh,kw]."""
    _check_stride("conv2d", stride)
    _expect_rank("conv2d", x, 4)
    _expect_rank("conv2d", weight, 4)
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError("conv2d", "Cin", wcin, cin)
    if bias is not None and bias.shape != (cout,):
        raise ShapeError("conv2d", "Cout (bias)", cout, list(bias.shape))

    if padding == "same":
        oh, top, bottom = _same_padding(h, kh, stride)
        ow, left, right = _same_padding(w, kw, stride)
    elif padding == "valid":
        if h < kh:
            raise ShapeError("conv2d", "H", f">= {kh}", h)
        if w < kw:
            raise ShapeError("conv2d", "W", f">= {kw}", w)
        oh, ow = (h - kh) // stride + 1, (w - kw) // stride + 1
        top = bottom = left = right = 0
    else:
        raise ConfigError(f"conv2d: padding must be 'same' or 'valid', not '{padding}'")

    if top or bottom or left or right:
        xp = np.pad(x.data, ((0, 0), (0, 0), (top, bottom), (left, right)))
    else:
        xp = x.data
    wmat = weight.data.reshape(cout, cin * kh * kw)

    def forward_one(i):
        return (wmat @ _im2col(xp[i], kh, kw, stride, oh, ow)).reshape(cout, oh, ow)

    out = np.stack(map_batch(forward_one, n))
    if bias is not None:
        out += bias.data[None, :, None, None]

    def vjp(g):
        def grads_one(i):
            gi = g[i].reshape(cout, oh * ow)
            gx_i = gw_i = None
            if x.requires_grad:
                dxp = _col2im(wmat.T @ gi, xp.shape[1:], kh, kw, stride, oh, ow)
                gx_i = dxp[:, top : top + h, left : left + w]
            if weight.requires_grad:
                gw_i = gi @ _im2col(xp[i], kh, kw, stride, oh, ow).T
            return gx_i, gw_i

        parts = map_batch(grads_one, n)
        gx = np.stack([p[0] for p in parts]) if x.requires_grad else None
        gw = ordered_sum([p[1] for p in parts]).reshape(weight.shape) if weight.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("conv2d", inputs, out, vjp)


def conv_transpose2d(x, weight, bias=None, stride=2):
    """
    Transposed convolution of x[N,Cin,H,W] with weight[Cin,Cout,kh,kw].

    The output is exactly stride*H by stride*W: it is the input-gradient of a
    same-padded conv2d with the same kernel and stride.
    """
    _check_stride("conv_transpose2d", stride)
    _expect_rank("conv_transpose2d", x, 4)
    _expect_rank("conv_transpose2d", weight, 4)
    n, cin, h, w = x.shape
    wcin, cout, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError("conv_transpose2d", "Cin", wcin, cin)
    if bias is not None and bias.shape != (cout,):
        raise ShapeError("conv_transpose2d", "Cout (bias)", cout, list(bias.shape))

    oh, ow = stride * h, stride * w
    top = max(kh - stride, 0) // 2
    left = max(kw - stride, 0) // 2
    full = (cout, max((h - 1) * stride + kh, top + oh), max((w - 1) * stride + kw, left + ow))
    wmat = weight.data.reshape(cin, cout * kh * kw)
    xd = x.data

    def forward_one(i):
        cols = wmat.T @ xd[i].reshape(cin, h * w)
        return _col2im(cols, full, kh, kw, stride, h, w)[:, top : top + oh, left : left + ow]

    out = np.stack(map_batch(forward_one, n))
    if bias is not None:
        out += bias.data[None, :, None, None]

    def vjp(g):
        gbuf = np.zeros((n,) + full, dtype=g.dtype)
        gbuf[:, :, top : top + oh, left : left + ow] = g

        def grads_one(i):
            gcols = _im2col(gbuf[i], kh, kw, stride, h, w)
            gx_i = (wmat @ gcols).reshape(cin, h, w) if x.requires_grad else None
            gw_i = xd[i].reshape(cin, h * w) @ gcols.T if weight.requires_grad else None
            return gx_i, gw_i

        parts = map_batch(grads_one, n)
        gx = np.stack([p[0] for p in parts]) if x.requires_grad else None
        gw = ordered_sum([p[1] for p in parts]).reshape(weight.shape) if weight.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("conv_transpose2d", inputs, out, vjp)


# --- pooling and resampling -------------------------------------------------


def maxpool2(x):
    """2x2 max pooling, stride 2. Ties go to the first element in row-major order."""
    _expect_rank("maxpool2", x, 4)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ConfigError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    windows = (
        x.data.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    idx = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, idx, axis=-1)[..., 0]

    def vjp(g):
        gw = np.zeros_like(windows)
        np.put_along_axis(gw, idx, g[..., None], axis=-1)
        gx = (
            gw.reshape(n, c, h // 2, w // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return (gx,)

    return record("maxpool2", (x,), out, vjp)


def interpolation_matrix(n_in, n_out, dtype=np.float64):
    """Row i holds the bilinear weights of output pixel i (align_corners=False)."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    lam = src - i0
    rows = np.arange(n_out)
    m = np.zeros((n_out, n_in), dtype=dtype)
    np.add.at(m, (rows, i0), 1.0 - lam)
    np.add.at(m, (rows, i1), lam)
    return m


def bilinear_upsample(x, out_h, out_w):
    _expect_rank("bilinear_upsample", x, 4)
    if out_h < 1 or out_w < 1:
        raise ShapeError("bilinear_upsample", "output size", ">= 1", (out_h, out_w))
    _, _, h, w = x.shape
    ah = interpolation_matrix(h, out_h, x.data.dtype)
    aw = interpolation_matrix(w, out_w, x.data.dtype)
    out = ah @ x.data @ aw.T

    def vjp(g):
        return (ah.T @ g @ aw,)

    return record("bilinear_upsample", (x,), out, vjp)


def global_avg_pool(x):
    _expect_rank("global_avg_pool", x, 4)
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).copy(),)

    return record("global_avg_pool", (x,), out, vjp)


# --- elementwise suite ------------------------------------------------------


def add(a, b):
    _broadcast_shape("add", a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record("add", (a, b), a.data + b.data, vjp)


def add_scaled(a, b, w):
    """a + w*b, the residual-scaling update."""
    _broadcast_shape("add_scaled", a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(w * g, b.shape)

    return record("add_scaled", (a, b), a.data + w * b.data, vjp)


def hadamard(a, b):
    _broadcast_shape("hadamard", a, b)
    ad, bd = a.data, b.data

    def vjp(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return record("hadamard", (a, b), ad * bd, vjp)


def scale(x, c):
    def vjp(g):
        return (c * g,)

    return record("scale", (x,), c * x.data, vjp)


def add_scalar(x, c):
    def vjp(g):
        return (g,)

    return record("add_scalar", (x,), x.data + c, vjp)


def concat(tensors, axis=1):
    if not tensors:
        raise UsageError("concat needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref):
            raise ShapeError("concat", "rank", len(ref), t.ndim)
        for d, (want, got) in enumerate(zip(ref, t.shape)):
            if d != axis and want != got:
                raise ShapeError("concat", f"axis {d}", want, got)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record("concat", tuple(tensors), out, vjp)


def slice_axis(x, start, stop, axis=1):
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[index] = g
        return (gx,)

    return record("slice", (x,), x.data[index], vjp)


def split(x, sizes, axis=1):
    if sum(sizes) != x.shape[axis]:
        raise ShapeError("split", f"axis {axis}", sum(sizes), x.shape[axis])
    parts, start = [], 0
    for size in sizes:
        parts.append(slice_axis(x, start, start + size, axis))
        start += size
    return parts


def leaky_relu(x, slope=0.01):
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data)

    def vjp(g):
        return (np.where(positive, g, slope * g),)

    return record("leaky_relu", (x,), out, vjp)


def relu(x):
    positive = x.data > 0
    out = np.where(positive, x.data, 0.0).astype(x.data.dtype)

    def vjp(g):
        return (np.where(positive, g, 0.0).astype(g.dtype),)

    return record("relu", (x,), out, vjp)


def sigmoid(x):
    out = expit(x.data)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return record("sigmoid", (x,), out, vjp)


def dropout(x, p, training, rng=None):
    """Inverted dropout; the identity when not training."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise UsageError("dropout in training mode needs a seeded generator")
    mask = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)

    def vjp(g):
        return (g * mask,)

    return record("dropout", (x,), x.data * mask, vjp)


# --- dense and reductions ---------------------------------------------------


def linear(x, weight, bias=None):
    """x[N,Cin] @ weight[Cout,Cin].T + bias[Cout]."""
    _expect_rank("linear", x, 2)
    if weight.shape[1] != x.shape[1]:
        raise ShapeError("linear", "Cin", weight.shape[1], x.shape[1])
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def vjp(g):
        gb = g.sum(axis=0) if bias is not None else None
        return g @ weight.data, g.T @ x.data, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("linear", inputs, out, vjp)


def reshape(x, shape):
    def vjp(g):
        return (g.reshape(x.shape),)

    return record("reshape", (x,), x.data.reshape(shape), vjp)


def reduce_sum(x):
    def vjp(g):
        return (np.broadcast_to(g, x.shape).copy(),)

    return record("sum", (x,), np.asarray(x.data.sum()), vjp)


def reduce_mean(x):
    def vjp(g):
        return (np.broadcast_to(g / x.size, x.shape).copy(),)

    return record("mean", (x,), np.asarray(x.data.mean()), vjp)


def constant(data):
    """A Tensor that never asks for a gradient (targets, fixed image features)."""
    return Tensor(data, requires_grad=False)
