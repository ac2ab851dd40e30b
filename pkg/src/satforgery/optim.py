"""Adam and plain SGD updates over named parameter collections.

Parameters and gradients are dicts mapping names to ndarrays. Updates are
functional: a fresh dict is returned, the optimizer state carries the Adam
moments and step counter.
"""

from dataclasses import dataclass, field

import numpy as np

from .layers import ShapeError


@dataclass
class OptimizerState:
    kind: str                      # "adam" or "sgd"
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)  # first moments, per parameter name
    v: dict = field(default_factory=dict)  # second moments

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def _check_shapes(params, grads):
    for name, p in params.items():
        g = grads.get(name)
        if g is None or g.shape != p.shape:
            raise ShapeError(f"gradient for {name!r} missing or shape mismatch")


def adam_step(state, params, grads):
    """One bias-corrected Adam update; returns the new parameter dict."""
    if state.kind != "adam":
        raise ValueError("adam_step requires an adam OptimizerState")
    _check_shapes(params, grads)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p, dtype=np.float64)
            v = np.zeros_like(p, dtype=np.float64)
        else:
            v = state.v[name]
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        upd = state.learning_rate * mhat / (np.sqrt(vhat) + state.epsilon)
        out[name] = (p - upd).astype(p.dtype, copy=False)
    return out


def sgd_step(state, params, grads):
    """Plain gradient descent (no momentum); returns the new parameter dict."""
    if state.kind != "sgd":
        raise ValueError("sgd_step requires an sgd OptimizerState")
    _check_shapes(params, grads)
    state.step += 1
    return {name: (p - state.learning_rate * grads[name]).astype(p.dtype, copy=False)
            for name, p in params.items()}
