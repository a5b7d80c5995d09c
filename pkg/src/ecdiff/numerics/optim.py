"""Adam with bias correction, operating on the tensor engine's parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NumericsError, Tensor


@dataclass
class AdamState:
    lr: float = 8e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], lr: float = 8e-5, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = [np.zeros_like(p.array) for p in params]
        state.v = [np.zeros_like(p.array) for p in params]
        return state


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState):
    """One Adam update in place; returns (params, state) for convenience."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise NumericsError("adam_step: params/grads/state length mismatch")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        if g.shape != p.array.shape:
            raise NumericsError(f"adam_step: grad shape {g.shape} != param shape {p.array.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.array -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
