"""Adam with optional linear-to-zero annealing and global-norm clipping."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalError
from .params import Layout, ParamVector


@dataclass
class AdamState:
    m1: np.ndarray
    m2: np.ndarray
    layout: Layout
    lr: float
    total_updates: int | None = None  # None: constant lr; else linear decay to zero
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5

    @classmethod
    def create(cls, layout: Layout, lr: float, total_updates: int | None = None, **kw) -> AdamState:
        if lr <= 0:
            raise ValueError("Adam learning rate must be positive")
        if total_updates is not None and total_updates < 1:
            raise ValueError("total_updates must be >= 1 when annealing")
        return cls(np.zeros(layout.size), np.zeros(layout.size), layout, float(lr), total_updates, **kw)

    def effective_lr(self) -> float:
        if self.total_updates is None:
            return self.lr
        return self.lr * max(0.0, 1.0 - self.step_count / self.total_updates)

    def copy(self) -> AdamState:
        return replace(self, m1=self.m1.copy(), m2=self.m2.copy())


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.sqrt(np.dot(grad, grad)))
    if norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


def adam_step(state: AdamState, params: ParamVector, grad: ParamVector, max_grad_norm: float):
    """One descent step on ``params`` along ``grad``; returns ``(params', state', grad_norm)``.

    The inputs are not modified.
    """
    params.check_layout(grad)
    if params.layout != state.layout:
        raise ValueError("Adam state layout does not match the parameters")
    if max_grad_norm <= 0:
        raise ValueError("max_grad_norm must be positive")
    if not np.all(np.isfinite(grad.data)):
        raise NumericalError("non-finite gradient")
    g, norm = clip_by_global_norm(grad.data, max_grad_norm)
    lr = state.effective_lr()
    t = state.step_count + 1
    m1 = state.beta1 * state.m1 + (1.0 - state.beta1) * g
    m2 = state.beta2 * state.m2 + (1.0 - state.beta2) * (g * g)
    m1_hat = m1 / (1.0 - state.beta1**t)
    m2_hat = m2 / (1.0 - state.beta2**t)
    new = params.data - lr * m1_hat / (np.sqrt(m2_hat) + state.eps)
    return ParamVector(new, params.layout), replace(state, m1=m1, m2=m2, step_count=t), norm
