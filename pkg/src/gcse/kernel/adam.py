"""Bias-corrected adaptive-moment parameter updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .mlp import GradBundle, MLPParams


@dataclass(frozen=True)
class OptimizerState:
    """Per-parameter first/second moment accumulators plus step count."""

    m_w: tuple[np.ndarray, ...]
    m_b: tuple[np.ndarray, ...]
    v_w: tuple[np.ndarray, ...]
    v_b: tuple[np.ndarray, ...]
    step: int
    learning_rate: float
    beta1: float
    beta2: float
    eps: float

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("moment coefficients must lie in [0, 1)")


def init_optimizer(
    params: MLPParams,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> OptimizerState:
    zeros_w = tuple(np.zeros_like(w) for w in params.weights)
    zeros_b = tuple(np.zeros_like(b) for b in params.biases)
    return OptimizerState(
        m_w=zeros_w,
        m_b=zeros_b,
        v_w=tuple(np.zeros_like(w) for w in params.weights),
        v_b=tuple(np.zeros_like(b) for b in params.biases),
        step=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_update(
    state: OptimizerState, params: MLPParams, grads: GradBundle
) -> tuple[OptimizerState, MLPParams]:
    """One optimizer step; returns fresh state and parameters.

    Non-finite gradients propagate into the new parameters; divergence
    detection is the caller's job.
    """
    ops = backend.ops
    t = state.step + 1
    new_w, new_mw, new_vw = [], [], []
    for p, g, m, v in zip(params.weights, grads.weight_grads, state.m_w, state.v_w):
        p2, m2, v2 = ops.adam_step(
            p, g, m, v, t, state.learning_rate, state.beta1, state.beta2, state.eps
        )
        new_w.append(p2)
        new_mw.append(m2)
        new_vw.append(v2)
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(params.biases, grads.bias_grads, state.m_b, state.v_b):
        p2, m2, v2 = ops.adam_step(
            p, g, m, v, t, state.learning_rate, state.beta1, state.beta2, state.eps
        )
        new_b.append(p2)
        new_mb.append(m2)
        new_vb.append(v2)
    next_state = OptimizerState(
        m_w=tuple(new_mw),
        m_b=tuple(new_mb),
        v_w=tuple(new_vw),
        v_b=tuple(new_vb),
        step=t,
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    next_params = MLPParams(
        tuple(new_w), tuple(new_b), alpha=params.alpha, output=params.output
    )
    return next_state, next_params
