"""Action distributions: categorical over logits and diagonal Gaussian."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .rng import Streams

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PolicyHead:
    """``kind`` is ``"categorical"`` (dim = number of actions) or ``"gaussian"`` (dim = action dims).

    Gaussian distribution parameters are laid out per row as ``[mean, log_std]``,
    so ``param_dim`` is ``2 * dim`` for that kind.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("categorical", "gaussian"):
            raise ValueError(f"unknown head kind {self.kind!r}")
        if self.kind == "categorical" and self.dim < 2:
            raise ValueError("categorical head needs at least 2 actions")
        if self.dim < 1:
            raise ValueError("head dimension must be >= 1")

    @property
    def param_dim(self) -> int:
        return self.dim if self.kind == "categorical" else 2 * self.dim


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check(head: PolicyHead, dist_params: np.ndarray) -> np.ndarray:
    p = np.asarray(dist_params, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[-1] != head.param_dim:
        raise ValueError(f"{head.kind} head expects {head.param_dim} params, got {p.shape[-1]}")
    if not np.all(np.isfinite(p)):
        raise NumericalError("non-finite distribution parameters")
    return p


def log_prob_and_entropy(head: PolicyHead, dist_params, actions):
    """Per-row log-probability, entropy, and d log_prob / d dist_params.

    Accepts a single row or a batch; returns arrays with a leading batch axis
    (length 1 for a single row).
    """
    p = _check(head, dist_params)
    if head.kind == "categorical":
        a = np.asarray(actions).reshape(-1).astype(np.int64)
        if a.shape[0] != p.shape[0]:
            raise ValueError("one action per row required")
        if np.any(a < 0) or np.any(a >= head.dim):
            raise ValueError(f"action index out of range [0, {head.dim})")
        logp_all = log_softmax(p)
        probs = np.exp(logp_all)
        rows = np.arange(p.shape[0])
        logp = logp_all[rows, a]
        entropy = -(probs * logp_all).sum(axis=-1)
        grad = -probs
        grad[rows, a] += 1.0
        return logp, entropy, grad
    d = head.dim
    a = np.asarray(actions, dtype=np.float64).reshape(p.shape[0], d)
    mean, log_std = p[:, :d], p[:, d:]
    z = (a - mean) * np.exp(-log_std)
    logp = (-0.5 * z * z - log_std - HALF_LOG_2PI).sum(axis=-1)
    entropy = (0.5 + HALF_LOG_2PI + log_std).sum(axis=-1)
    grad = np.concatenate([z * np.exp(-log_std), z * z - 1.0], axis=-1)
    return logp, entropy, grad


def sample(head: PolicyHead, dist_params: np.ndarray, streams: Streams, mask=None) -> np.ndarray:
    """One action per row, row ``i`` drawing from stream slot ``i``."""
    p = _check(head, dist_params)
    if head.kind == "categorical":
        probs = np.exp(log_softmax(p))
        cdf = np.cumsum(probs, axis=-1)
        u = streams.uniform(mask)
        idx = (u[:, None] * cdf[:, -1:] >= cdf).sum(axis=-1)
        return np.minimum(idx, head.dim - 1)
    d = head.dim
    noise = np.stack([streams.normal(mask) for _ in range(d)], axis=-1)
    return p[:, :d] + np.exp(p[:, d:]) * noise
