"""
Dense tensors and the tape that records differentiable operations.

Every operation in `msrfnet.ops` computes its output eagerly with numpy and,
when a `GradTape` is active and one of its inputs requires a gradient, appends
an `OpRecord` holding the vector-Jacobian product of the operation. `backward`
walks the tape in reverse and accumulates gradients by summation.

Usage:
    with GradTape() as tape:
        loss = some_scalar_function(params)
    grads = backward(loss, tape, params)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, UsageError

logger = logging.getLogger(__name__)

DTYPES = {"float64": np.float64, "float32": np.float32}

_default_dtype = np.float64
_num_threads = 1
_active_tapes = []


def set_default_dtype(name):
    global _default_dtype
    if name not in DTYPES:
        raise ConfigError(f"dtype must be one of {sorted(DTYPES)}, not '{name}'")
    _default_dtype = DTYPES[name]


def get_default_dtype():
    return _default_dtype


def set_num_threads(n):
    """Cap the worker threads used for per-sample work inside convolutions."""
    global _num_threads
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    _num_threads = int(n)
    logger.debug("tensor core limited to %d thread(s)", _num_threads)


def get_num_threads():
    return _num_threads


def map_batch(fn, n):
    """
    Apply `fn` to the batch indices 0..n-1 and return the results in index
    order. Callers reduce the returned list sequentially, so the result is the
    same whatever the thread count.
    """
    if _num_threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=min(_num_threads, n)) as pool:
        return list(pool.map(fn, range(n)))


def ordered_sum(parts):
    total = parts[0].copy()
    for part in parts[1:]:
        total += part
    return total


class Tensor:
    """A dense N-dimensional array of reals (NCHW for 4-D activations)."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
                dtype = data.dtype
            else:
                dtype = _default_dtype
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        label = f", name='{self.name}'" if self.name else ""
        return f"Tensor(shape={list(self.shape)}, requires_grad={self.requires_grad}{label})"


@dataclass
class OpRecord:
    op: str
    inputs: tuple
    output: Tensor
    vjp: Callable


class GradTape:
    """Ordered record of the differentiable operations run while it is active."""

    def __init__(self):
        self.records = []

    def __enter__(self):
        _active_tapes.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tapes.remove(self)
        return False

    def __len__(self):
        return len(self.records)

    def ops(self):
        return [record.op for record in self.records]


def record(op, inputs, out_data, vjp):
    """Wrap `out_data` in a Tensor and put the operation on the active tape."""
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=requires_grad)
    if requires_grad and _active_tapes:
        _active_tapes[-1].records.append(OpRecord(op, tuple(inputs), out, vjp))
    return out


def backward(loss, tape, params=None):
    """
    Reverse-mode pass from a scalar `loss` over `tape`.

    Returns a dict of gradients keyed by tensor name for every named leaf the
    loss depends on. When `params` (a ParamStore) is given, the dict has one
    entry per parameter, zeros for parameters the loss does not reach.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {list(loss.shape)}")
    if not any(rec.output is loss for rec in tape.records):
        raise UsageError("loss was not produced by an operation on this tape")

    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        for t, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if t.name is not None:
                leaves[key] = t

    named = {t.name: grads[key] for key, t in leaves.items() if key in grads}
    if params is None:
        return named
    return {
        name: named[name] if name in named else np.zeros_like(tensor.data)
        for name, tensor in params.items()
    }
