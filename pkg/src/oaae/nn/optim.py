from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    learning_rate: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **hyper)


def adam_step(params, grads, state: AdamState):
    """Bias-corrected Adam update.  Returns new parameter arrays and a new state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and Adam moments must have matching lengths")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        dt = p.dtype.type
        g = g.astype(p.dtype, copy=False)
        m = dt(b1) * m + dt(1 - b1) * g
        v = dt(b2) * v + dt(1 - b2) * g * g
        update = dt(state.learning_rate) * (m / dt(c1)) / (np.sqrt(v / dt(c2)) + dt(state.epsilon))
        new_params.append(p - update)
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(state.learning_rate, b1, b2, state.epsilon, t, new_m, new_v)
    return new_params, new_state
