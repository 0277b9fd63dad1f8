"""Adam, global-norm gradient clipping and polynomial learning-rate decay."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def lr_schedule(epoch: int, alpha_min: float, a: float = -0.5, b: float = 0.2) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return alpha_min * (b * epoch + 1.0) ** a


def global_norm(grads) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g))) for g in grads))


def clip_gradient(grads, threshold: float):
    """Scale the list of arrays so that its joint L2 norm is at most ``threshold``.

    Returns ``(clipped, norm_before)``.
    """
    if not threshold > 0:
        raise ValueError("clip threshold must be positive")
    norm = global_norm(grads)
    if norm > threshold:
        scale = threshold / norm
        return [g * scale for g in grads], norm
    return [np.array(g, copy=True) for g in grads], norm


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(state: AdamState, params, grads, lr: float) -> None:
    """In-place bias-corrected Adam update of ``params`` (list of arrays)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and moment lists differ in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
