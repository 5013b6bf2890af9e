"""Adam optimizer state and the standalone dropout perturbation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Parameter

__all__ = ["AdamState", "adam_step", "dropout_apply"]


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus hyperparameters."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, Parameter], lr: float, beta1: float = 0.9, **kw):
        state = cls(lr=lr, beta1=beta1, **kw)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        return state


def adam_step(params: dict[str, Parameter], state: AdamState) -> None:
    """One Adam update with bias correction, reading each Parameter's grad."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.value -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def dropout_apply(x: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted dropout: zero each element with probability ``rate`` and scale
    survivors by 1/(1-rate), preserving the expectation."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate)
