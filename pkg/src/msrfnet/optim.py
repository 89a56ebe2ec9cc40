"""
Adam with bias-corrected moments, updating a ParamStore in place.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError


@dataclass
class OptimState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=1e-4, **kwargs):
        if lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {lr}")
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
            lr=lr,
            **kwargs,
        )


def adam_step(params, grads, state):
    """p <- p - lr * m_hat / (sqrt(v_hat) + eps)"""
    if set(grads) != set(params.names()):
        missing = sorted(set(params.names()) - set(grads))
        extra = sorted(set(grads) - set(params.names()))
        raise UsageError(
            f"gradients do not match parameters (missing: {missing[:3]}, unexpected: {extra[:3]})"
        )

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, tensor in params.items():
        g = grads[name]
        if g.shape != tensor.shape:
            raise UsageError(f"gradient for {name} has shape {list(g.shape)}, expected {list(tensor.shape)}")
        m = state.m.setdefault(name, np.zeros_like(tensor.data))
        v = state.v.setdefault(name, np.zeros_like(tensor.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        tensor.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
