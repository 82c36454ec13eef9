"""Outer-loop updates applied to the displacement produced by one PPO iteration.

For every strategy the outer gradient is ``g = theta_star - theta_k``.

* ``standard``: ``theta_{k+1} = theta_star``.
* ``lr``: ``theta_{k+1} = theta_k + sigma * g``.
* ``nesterov``: ``m_k = mu * m_{k-1} + g``;
  ``theta_{k+1} = theta_k + sigma * (m_k + mu * g)``.
* ``biased``: the inner loop starts from ``theta_k + alpha * m_{k-1}``, the
  update is ``theta_{k+1} = theta_star`` and afterwards
  ``m_k = mu * m_{k-1} + (1 - mu) * g``.

Updates are evaluated as ``theta_star + (sigma * v - g)`` with ``v`` the
strategy's step direction.  This equals ``theta_k + sigma * v`` in exact
arithmetic, and makes ``sigma = 1`` (``lr``) and ``mu = 0`` (``nesterov``)
reproduce ``standard`` and ``lr`` bit for bit instead of up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .params import ParamVector

STRATEGIES = ("standard", "lr", "nesterov", "biased")


@dataclass
class OuterState:
    strategy: str = "standard"
    sigma: float = 1.0
    mu: float = 0.0
    alpha: float = 0.0
    momentum: np.ndarray | None = None  # zero-initialized on first use
    k: int = 0

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown outer strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if not self.sigma > 0:
            raise ConfigError(f"outer learning rate sigma must be > 0, got {self.sigma}")
        if not 0.0 <= self.mu < 1.0:
            raise ConfigError(f"momentum mu must lie in [0, 1), got {self.mu}")
        if not self.alpha >= 0:
            raise ConfigError(f"bias rate alpha must be >= 0, got {self.alpha}")

    def momentum_for(self, theta: ParamVector) -> np.ndarray:
        if self.momentum is None:
            return np.zeros_like(theta.data)
        if self.momentum.shape != theta.data.shape:
            raise ValueError("momentum layout does not match the parameters")
        return self.momentum

    @property
    def effective_lr(self) -> float:
        if self.strategy == "nesterov":
            return self.sigma / (1.0 - self.mu)
        if self.strategy == "lr":
            return self.sigma
        return 1.0

    def copy(self) -> OuterState:
        return replace(self, momentum=None if self.momentum is None else self.momentum.copy())


def outer_gradient(theta_k: ParamVector, theta_star: ParamVector) -> ParamVector:
    theta_k.check_layout(theta_star)
    return ParamVector(theta_star.data - theta_k.data, theta_k.layout)


def _step_from_star(theta_star: ParamVector, g: ParamVector, sigma: float, direction: np.ndarray) -> ParamVector:
    delta = sigma * direction - g.data
    # leave entries untouched where the correction vanishes so signed zeros survive too
    return ParamVector(np.where(delta == 0.0, theta_star.data, theta_star.data + delta), theta_star.layout)


def apply_standard(theta_k: ParamVector, g: ParamVector) -> ParamVector:
    """``theta_k + g`` recovered as the inner-loop solution itself."""
    theta_k.check_layout(g)
    return ParamVector(theta_k.data + g.data, theta_k.layout)


def apply_outer_lr(theta_k: ParamVector, g: ParamVector, sigma: float, theta_star: ParamVector | None = None) -> ParamVector:
    if not sigma > 0:
        raise ConfigError("sigma must be > 0")
    theta_k.check_layout(g)
    if theta_star is None:
        return ParamVector(theta_k.data + sigma * g.data, theta_k.layout)
    return _step_from_star(theta_star, g, sigma, g.data)


def apply_outer_nesterov(state: OuterState, theta_k: ParamVector, g: ParamVector, theta_star: ParamVector | None = None):
    """Returns ``(theta_{k+1}, state')`` with the new momentum stored in ``state'``."""
    theta_k.check_layout(g)
    m = state.mu * state.momentum_for(theta_k) + g.data
    direction = m + state.mu * g.data
    if theta_star is None:
        new = ParamVector(theta_k.data + state.sigma * direction, theta_k.layout)
    else:
        new = _step_from_star(theta_star, g, state.sigma, direction)
    return new, replace(state, momentum=m, k=state.k + 1)


def biased_iteration_bias(theta_k: ParamVector, state: OuterState) -> ParamVector:
    """Starting point of the inner loop: ``theta_k + alpha * m`` with the previous iteration's momentum."""
    return ParamVector(theta_k.data + state.alpha * state.momentum_for(theta_k), theta_k.layout)


def outer_step(state: OuterState, theta_k: ParamVector, theta_star: ParamVector):
    """Dispatch to the strategy's update. Returns ``(theta_{k+1}, state', diagnostics)``."""
    g = outer_gradient(theta_k, theta_star)
    if state.strategy == "standard":
        new, state = theta_star.copy(), replace(state, k=state.k + 1)
    elif state.strategy == "lr":
        new = apply_outer_lr(theta_k, g, state.sigma, theta_star)
        state = replace(state, k=state.k + 1)
    elif state.strategy == "nesterov":
        new, state = apply_outer_nesterov(state, theta_k, g, theta_star)
    elif state.strategy == "biased":
        m = state.mu * state.momentum_for(theta_k) + (1.0 - state.mu) * g.data
        new, state = theta_star.copy(), replace(state, momentum=m, k=state.k + 1)
    else:
        raise ConfigError(f"unknown outer strategy {state.strategy!r}")
    diagnostics = {
        "outer_grad_norm": g.norm(),
        "step_norm": float(np.linalg.norm(new.data - theta_k.data)),
        "momentum_norm": 0.0 if state.momentum is None else float(np.linalg.norm(state.momentum)),
        "effective_lr": state.effective_lr,
    }
    return new, state, diagnostics
