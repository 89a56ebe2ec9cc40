"""
Central finite-difference checks of the tape gradients.

The relative error of one entry is |g_ad - g_fd| / max(1, |g_fd|).
"""

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import pandas as pd

from . import data as dataio
from .errors import ConfigError
from .network import network_param_shapes
from .params import ParamStore
from .tensor import GradTape, backward, set_default_dtype
from .trainer import loss_on_batch

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
STEP = 1e-5


class GradcheckEntry(NamedTuple):
    name: str
    index: tuple
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradcheckReport:
    entries: list = field(default_factory=list)
    tolerance: float = TOLERANCE

    @property
    def worst(self):
        return max(self.entries, key=lambda e: e.rel_error) if self.entries else None

    @property
    def passed(self):
        return all(e.rel_error < self.tolerance for e in self.entries)

    def to_frame(self):
        return pd.DataFrame(self.entries, columns=GradcheckEntry._fields)


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(1.0, abs(numeric))


def numeric_gradient(f, array, index, h=STEP):
    """(f(x + h) - f(x - h)) / 2h with `array[index]` perturbed in place."""
    original = array[index]
    array[index] = original + h
    plus = f()
    array[index] = original - h
    minus = f()
    array[index] = original
    return (plus - minus) / (2.0 * h)


def _check(loss_fn, tensors, picks, tolerance, h):
    """`tensors` maps names to leaves; `picks` is a list of (name, index)."""
    with GradTape() as tape:
        loss = loss_fn()
    grads = backward(loss, tape)

    def value():
        return loss_fn().item()

    report = GradcheckReport(tolerance=tolerance)
    for name, index in picks:
        analytic = float(grads[name][index]) if name in grads else 0.0
        numeric = numeric_gradient(value, tensors[name].data, index, h)
        report.entries.append(
            GradcheckEntry(name, index, analytic, numeric, relative_error(analytic, numeric))
        )
    return report


def check_function(fn, inputs, n_samples=None, tolerance=TOLERANCE, h=STEP, seed=0):
    """
    Check `fn(*inputs)`, a scalar-valued function of named Tensors that require
    gradients. Every element is checked unless `n_samples` is given.
    """
    tensors = {t.name: t for t in inputs}
    if len(tensors) != len(inputs) or None in tensors:
        raise ConfigError("check_function needs uniquely named input tensors")
    picks = [(t.name, idx) for t in inputs for idx in np.ndindex(t.shape)]
    if n_samples is not None and n_samples < len(picks):
        rng = np.random.default_rng(seed)
        picks = [picks[i] for i in sorted(rng.choice(len(picks), n_samples, replace=False))]
    return _check(lambda: fn(*inputs), tensors, picks, tolerance, h)


def sample_parameters(params, n, rng):
    """`n` distinct (name, index) pairs drawn uniformly over all scalar parameters."""
    names = params.names()
    sizes = np.array([params[name].size for name in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = min(n, int(offsets[-1]))
    picks = []
    for flat in sorted(rng.choice(int(offsets[-1]), n, replace=False)):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[k]
        picks.append((name, np.unravel_index(int(flat - offsets[k]), params[name].shape)))
    return picks


def gradcheck(cfg, n_params=25, tolerance=TOLERANCE, h=STEP, seed=0):
    """Total-loss gradients of a freshly initialized network on one synthetic sample."""
    if n_params < 1:
        raise ConfigError(f"gradcheck needs at least one parameter sample, got {n_params}")
    cfg.validate()
    net = replace(cfg.net, dtype="float64")
    if net.height != net.width:
        raise ConfigError("gradcheck draws a square synthetic sample; set height = width")
    set_default_dtype("float64")

    params = ParamStore.from_shapes(network_param_shapes(net), seed, np.float64)
    images, masks = dataio.stack_batch(dataio.synth_dataset(1, net.height, seed))
    picks = sample_parameters(params, n_params, np.random.default_rng(seed))
    logger.info("checking %d of %d parameters", len(picks), params.num_elements())
    tensors = {name: params[name] for name in params}
    return _check(
        lambda: loss_on_batch(params, net, images, masks), tensors, picks, tolerance, h
    )
