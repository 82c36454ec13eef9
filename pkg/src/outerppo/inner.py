"""The epoch / minibatch inner optimization that turns theta into theta*."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adam import AdamState, adam_step
from .agent import ActorCritic
from .errors import ConfigError
from .losses import clipped_policy_loss, clipped_value_loss
from .params import ParamVector, concat
from .rng import Streams
from .rollout import AdvantageEstimate, TransitionBatch, normalize_advantages


@dataclass
class PpoConfig:
    num_envs: int = 16
    rollout_length: int = 128
    num_epochs: int = 4
    num_minibatches: int = 8
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    max_grad_norm: float = 0.5
    reward_scale: float = 1.0
    value_clip_eps: float | None = None  # None: same as clip_eps
    anneal_lr: bool = True
    normalize_advantages: bool = True
    adam_eps: float = 1e-5

    @property
    def batch_size(self) -> int:
        return self.num_envs * self.rollout_length

    @property
    def minibatch_size(self) -> int:
        return self.batch_size // self.num_minibatches

    @property
    def value_clip(self) -> float:
        return self.clip_eps if self.value_clip_eps is None else self.value_clip_eps

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.num_envs >= 1, "num_envs must be >= 1")
        need(self.rollout_length >= 1, "rollout_length must be >= 1")
        need(self.num_epochs >= 1, "num_epochs must be >= 1")
        m = self.num_minibatches
        need(m >= 1 and (m & (m - 1)) == 0, "num_minibatches must be a power of two")
        need(self.batch_size % m == 0, "num_envs * rollout_length must be divisible by num_minibatches")
        need(self.actor_lr > 0 and self.critic_lr > 0, "learning rates must be positive")
        need(0.0 <= self.gamma <= 1.0, "gamma must lie in [0, 1]")
        need(0.0 <= self.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]")
        need(0.0 < self.clip_eps, "clip_eps must be positive")
        need(self.max_grad_norm > 0, "max_grad_norm must be positive")
        need(self.reward_scale > 0, "reward_scale must be positive")
        need(self.value_clip > 0, "value_clip_eps must be positive")
        need(self.adam_eps > 0, "adam_eps must be positive")


def make_optimizers(agent: ActorCritic, cfg: PpoConfig, total_updates: int | None):
    anneal = total_updates if cfg.anneal_lr else None
    actor = AdamState.create(agent.actor_layout(), cfg.actor_lr, anneal, eps=cfg.adam_eps)
    critic = AdamState.create(agent.critic_layout(), cfg.critic_lr, anneal, eps=cfg.adam_eps)
    return actor, critic


def inner_optimization_loop(
    agent: ActorCritic,
    theta: ParamVector,
    batch: TransitionBatch,
    estimate: AdvantageEstimate,
    cfg: PpoConfig,
    adam_actor: AdamState,
    adam_critic: AdamState,
    streams: Streams,
):
    """Run ``num_epochs`` x ``num_minibatches`` Adam steps on actor and critic separately.

    Returns ``(theta_star, adam_actor, adam_critic, diagnostics)``; ``theta``
    and the batch are left untouched.  ``streams`` (first slot) drives the
    per-epoch shuffles and is advanced.
    """
    if cfg.num_epochs < 1:
        raise ConfigError("num_epochs must be >= 1")
    actor = theta.sub("actor/")
    critic = theta.sub("critic/")
    obs = batch.flat("obs")
    actions = batch.flat("actions")
    logp_old = batch.flat("behavior_log_probs")
    prev_values = batch.flat("values")
    adv_all = estimate.advantages.reshape(-1)
    targets = estimate.value_targets.reshape(-1)
    n = len(adv_all)
    if n % cfg.num_minibatches:
        raise ConfigError("batch size must be divisible by num_minibatches")
    size = n // cfg.num_minibatches
    pl, vl, cf, af, mr = [], [], [], [], []
    for _ in range(cfg.num_epochs):
        perm = streams.permutation(n)
        for j in range(cfg.num_minibatches):
            idx = perm[j * size : (j + 1) * size]
            adv = adv_all[idx]
            if cfg.normalize_advantages and size > 1:
                adv = normalize_advantages(adv)
            loss_p, g_p, diag = clipped_policy_loss(agent, actor, obs[idx], actions[idx], logp_old[idx], adv, cfg.clip_eps)
            actor, adam_actor, _ = adam_step(adam_actor, actor, g_p, cfg.max_grad_norm)
            loss_v, g_v = clipped_value_loss(agent, critic, obs[idx], targets[idx], prev_values[idx], cfg.value_clip)
            critic, adam_critic, _ = adam_step(adam_critic, critic, g_v, cfg.max_grad_norm)
            pl.append(loss_p)
            vl.append(loss_v)
            cf.append(diag["clip_fraction"])
            af.append(diag["active_fraction"])
            mr.append(diag["mean_ratio"])
    theta_star = concat([("actor/", actor), ("critic/", critic)])
    diagnostics = {
        "policy_loss": float(np.mean(pl)),
        "value_loss": float(np.mean(vl)),
        "clip_fraction": float(np.mean(cf)),
        "active_fraction": float(np.mean(af)),
        "mean_ratio": float(np.mean(mr)),
    }
    return theta_star, adam_actor, adam_critic, diagnostics
