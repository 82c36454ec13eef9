"""Clipped policy and value objectives with exact gradients.

Both are written as losses to minimize: the policy loss is the negated
clipped surrogate.
"""

from __future__ import annotations

import numpy as np

from .agent import ActorCritic
from .errors import NumericalError
from .heads import log_prob_and_entropy
from .params import ParamVector


def nonzero_gradient_indicator(ratio, advantage, clip_eps: float):
    """True where a sample still pushes on the clipped surrogate: |r-1| <= eps or (r-1)A <= 0."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    return (np.abs(ratio - 1.0) <= clip_eps) | ((ratio - 1.0) * advantage <= 0.0)


def clipped_policy_loss(
    agent: ActorCritic,
    actor: ParamVector,
    obs: np.ndarray,
    actions: np.ndarray,
    behavior_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
):
    """Return ``(loss, grad, diagnostics)`` for one minibatch."""
    dist, tape = agent.dist_params(actor, obs)
    logp, _, dlogp = log_prob_and_entropy(agent.head, dist, actions)
    ratio = np.exp(logp - behavior_log_probs)
    if not np.all(np.isfinite(ratio)):
        raise NumericalError("non-finite probability ratio")
    clipped_ratio = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    unclipped = ratio * advantages
    clipped = clipped_ratio * advantages
    take_unclipped = unclipped <= clipped
    surrogate = np.where(take_unclipped, unclipped, clipped)
    b = len(advantages)
    # d(surrogate)/d(ratio): A on the unclipped branch; the clipped branch is
    # only strictly smaller when the ratio is outside the band, where it is flat.
    dratio = np.where(take_unclipped, advantages, 0.0)
    dlogp_row = -(dratio * ratio) / b
    grad = agent.actor_backward(tape, dlogp[:, :] * dlogp_row[:, None])
    diagnostics = {
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
        "mean_ratio": float(np.mean(ratio)),
        "active_fraction": float(np.mean(nonzero_gradient_indicator(ratio, advantages, clip_eps))),
    }
    return float(-surrogate.mean()), grad, diagnostics


def clipped_value_loss(
    agent: ActorCritic,
    critic: ParamVector,
    obs: np.ndarray,
    value_targets: np.ndarray,
    prev_values: np.ndarray,
    value_clip_eps: float,
):
    """``mean(max((V - target)^2, (clip(V, prev - eps, prev + eps) - target)^2))`` and its gradient."""
    values, tape = agent.values(critic, obs)
    if values.shape != value_targets.shape or values.shape != prev_values.shape:
        raise ValueError("values, targets and previous values must align")
    clipped = np.clip(values, prev_values - value_clip_eps, prev_values + value_clip_eps)
    err_u = (values - value_targets) ** 2
    err_c = (clipped - value_targets) ** 2
    take_unclipped = err_u >= err_c
    in_band = (values >= prev_values - value_clip_eps) & (values <= prev_values + value_clip_eps)
    b = len(values)
    dvalues = np.where(
        take_unclipped,
        2.0 * (values - value_targets),
        np.where(in_band, 2.0 * (clipped - value_targets), 0.0),
    ) / b
    loss = float(np.where(take_unclipped, err_u, err_c).mean())
    if not np.isfinite(loss):
        raise NumericalError("non-finite value loss")
    return loss, agent.critic_backward(tape, dvalues)
