"""SGD and Adam over lists of numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteGradientError

OPTIMIZER_KINDS = ("sgd", "adam")


@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ContractError(f"unknown optimizer {self.kind!r}")
        if self.lr <= 0:
            raise ContractError("learning rate must be positive")

    @classmethod
    def for_params(cls, arrays, kind="adam", **hyper):
        state = cls(kind=kind, **hyper)
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
        return state


def _check(state, params, grads):
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("parameter, gradient and moment lists differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise DimensionError(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")
        if not np.isfinite(g).all():
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise NonFiniteGradientError(
                f"gradient {i} (shape {g.shape}) has {bad} non-finite entries at step {state.t + 1}"
            )


def adam_step(state: OptimizerState, params, grads):
    """One bias-corrected Adam update.

    ``state`` is advanced in place; the updated parameters are returned as new
    arrays and ``params`` is left untouched.
    """
    _check(state, params, grads)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m, v = state.m[i], state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        denom = np.sqrt(v / c2)
        denom += state.eps
        out.append(p - (state.lr / c1) * m / denom)
    return out, state


def sgd_step(state: OptimizerState, params, grads):
    _check(state, params, grads)
    state.t += 1
    return [p - state.lr * g for p, g in zip(params, grads)], state


def optimizer_step(state: OptimizerState, params, grads):
    if state.kind == "adam":
        return adam_step(state, params, grads)
    return sgd_step(state, params, grads)
