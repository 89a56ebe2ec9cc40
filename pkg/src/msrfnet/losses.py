"""
Segmentation losses: binary cross-entropy, Dice, their weighted combination and
the deeply supervised total loss with the shape-stream term.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .tensor import record

EPS = 1e-7
LOSS_MODES = ("both", "bce_only", "dice_only")


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    alpha: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0
    gamma: float = 1.0

    def validate(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"loss weight {f.name} must be >= 0, got {getattr(self, f.name)}")
        return self


def _target(op, yhat, y):
    y = np.asarray(getattr(y, "data", y), dtype=yhat.data.dtype)
    if y.shape != yhat.shape:
        raise ShapeError(op, "target shape", list(yhat.shape), list(y.shape))
    return y


def bce_loss(yhat, y):
    """Mean over pixels of (y - 1) log(1 - p) - y log p, p = clip(yhat, EPS, 1 - EPS)."""
    y = _target("bce_loss", yhat, y)
    p = np.clip(yhat.data, EPS, 1.0 - EPS)
    value = np.mean((y - 1.0) * np.log1p(-p) - y * np.log(p))
    inside = (yhat.data >= EPS) & (yhat.data <= 1.0 - EPS)

    def vjp(g):
        return (g * inside * ((1.0 - y) / (1.0 - p) - y / p) / y.size,)

    return record("bce_loss", (yhat,), np.asarray(value), vjp)


def dice_loss(yhat, y):
    """
    1 - (2 sum(y*p) + 1) / (sum(y) + sum(p) + 1), computed per batch element
    (sums over C, H, W) and averaged over the batch.
    """
    y = _target("dice_loss", yhat, y)
    p = yhat.data
    axes = tuple(range(1, p.ndim))
    inter = (y * p).sum(axis=axes)
    denom = y.sum(axis=axes) + p.sum(axis=axes) + 1.0
    per_image = 1.0 - (2.0 * inter + 1.0) / denom
    n = p.shape[0]
    expand = (slice(None),) + (None,) * len(axes)

    def vjp(g):
        numer = 2.0 * inter + 1.0
        d = -(2.0 * y * denom[expand] - numer[expand]) / (denom[expand] ** 2)
        return (g * d / n,)

    return record("dice_loss", (yhat,), np.asarray(per_image.mean()), vjp)


def combined_loss(yhat, y, lambda1=1.0, lambda2=1.0, mode="both"):
    if mode == "both":
        return ops.add(ops.scale(bce_loss(yhat, y), lambda1), ops.scale(dice_loss(yhat, y), lambda2))
    if mode == "bce_only":
        return ops.scale(bce_loss(yhat, y), lambda1)
    if mode == "dice_only":
        return ops.scale(dice_loss(yhat, y), lambda2)
    raise ConfigError(f"unknown loss mode '{mode}', expected one of {LOSS_MODES}")


def total_loss(pred, ds0, ds1, edge, y, y_edge, weights=LossWeights(), mode="both", deep_supervision=True):
    """
    alpha*L_comb(pred) + beta1*L_comb(ds0) + beta2*L_comb(ds1) + gamma*L_bce(edge).

    The deep-supervision terms are dropped when `deep_supervision` is off or the
    heads are missing; the shape-stream term is dropped when `edge` is None.
    """
    weights.validate()

    def comb(yhat):
        return combined_loss(yhat, y, weights.lambda1, weights.lambda2, mode)

    loss = ops.scale(comb(pred), weights.alpha)
    if deep_supervision and ds0 is not None and ds1 is not None:
        loss = ops.add(loss, ops.scale(comb(ds0), weights.beta1))
        loss = ops.add(loss, ops.scale(comb(ds1), weights.beta2))
    if edge is not None:
        loss = ops.add(loss, ops.scale(bce_loss(edge, y_edge), weights.gamma))
    return loss
