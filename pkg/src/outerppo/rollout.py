"""Trajectory collection and generalized advantage estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import ActorCritic
from .envs import Env, EnvState
from .errors import NumericalError
from .heads import log_prob_and_entropy, sample
from .params import ParamVector
from .rng import Streams, derive


@dataclass
class TransitionBatch:
    obs: np.ndarray  # [T, N, obs_dim]
    actions: np.ndarray  # [T, N] or [T, N, action_dim]
    behavior_log_probs: np.ndarray  # [T, N]
    rewards: np.ndarray  # [T, N], scaled
    raw_rewards: np.ndarray  # [T, N]
    terminated: np.ndarray  # [T, N]
    truncated: np.ndarray  # [T, N]
    values: np.ndarray  # [T, N]
    truncation_values: np.ndarray  # [T, N], V(final obs) where truncated, else 0
    bootstrap_values: np.ndarray  # [N]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rewards.shape

    def flat(self, name: str) -> np.ndarray:
        x = getattr(self, name)
        t, n = self.shape
        return x.reshape(t * n, *x.shape[2:])


@dataclass
class AdvantageEstimate:
    advantages: np.ndarray
    value_targets: np.ndarray
    gamma: float
    lam: float


@dataclass
class RolloutCarry:
    """What persists between rollouts: env slots, their current observations, action streams."""

    env_state: EnvState
    obs: np.ndarray
    streams: Streams

    def copy(self) -> RolloutCarry:
        return RolloutCarry(self.env_state.copy(), self.obs.copy(), self.streams.copy())


def start_carry(env: Env, seed: int, num_envs: int) -> RolloutCarry:
    """Env slot ``i`` uses stream ``derive(seed, "env", i)``; its actions use ``derive(seed, "action", i)``."""
    state, obs = env.reset(seed, num_envs)
    streams = Streams.from_keys([derive(seed, "action", i) for i in range(num_envs)])
    return RolloutCarry(state, obs, streams)


def carry_from_keys(env: Env, env_keys, action_keys) -> RolloutCarry:
    state, obs = env.reset(keys=env_keys)
    return RolloutCarry(state, obs, Streams.from_keys(action_keys))


def collect_rollout(
    agent: ActorCritic,
    theta: ParamVector,
    env: Env,
    carry: RolloutCarry,
    num_steps: int,
    reward_scale: float = 1.0,
) -> tuple[TransitionBatch, RolloutCarry]:
    """Run ``pi(theta)`` for ``num_steps`` on every slot, resetting finished episodes in place."""
    if num_steps < 1:
        raise ValueError("rollout length must be >= 1")
    carry = carry.copy()
    actor, critic = agent.split(theta)
    n = len(carry.env_state)
    obs_buf, act_buf, logp_buf, val_buf = [], [], [], []
    rew, raw, term_buf, trunc_buf, tv_buf = [], [], [], [], []
    obs = carry.obs
    state = carry.env_state
    for _ in range(num_steps):
        dist, _ = agent.dist_params(actor, obs)
        values, _ = agent.values(critic, obs)
        actions = sample(agent.head, dist, carry.streams)
        logp, _, _ = log_prob_and_entropy(agent.head, dist, actions)
        state, next_obs, reward, terminated, truncated = env.step(state, actions)
        tvals = np.zeros(n)
        if truncated.any():
            v_next, _ = agent.values(critic, next_obs[truncated])
            tvals[truncated] = v_next
        obs_buf.append(obs)
        act_buf.append(actions)
        logp_buf.append(logp)
        val_buf.append(values)
        raw.append(reward)
        rew.append(reward * reward_scale)
        term_buf.append(terminated)
        trunc_buf.append(truncated)
        tv_buf.append(tvals)
        done = terminated | truncated
        if done.any():
            state, next_obs = env.reset_where(state, done)
        obs = next_obs
    bootstrap, _ = agent.values(critic, obs)
    batch = TransitionBatch(
        obs=np.stack(obs_buf),
        actions=np.stack(act_buf),
        behavior_log_probs=np.stack(logp_buf),
        rewards=np.stack(rew),
        raw_rewards=np.stack(raw),
        terminated=np.stack(term_buf),
        truncated=np.stack(trunc_buf),
        values=np.stack(val_buf),
        truncation_values=np.stack(tv_buf),
        bootstrap_values=bootstrap,
    )
    for name in ("behavior_log_probs", "values", "truncation_values", "bootstrap_values"):
        if not np.all(np.isfinite(getattr(batch, name))):
            raise NumericalError(f"non-finite {name} during collection")
    carry.env_state, carry.obs = state, obs
    return batch, carry


def next_values(batch: TransitionBatch) -> np.ndarray:
    """V of the observation following each step (before any reset)."""
    nv = np.empty_like(batch.values)
    nv[:-1] = batch.values[1:]
    nv[-1] = batch.bootstrap_values
    return np.where(batch.truncated, batch.truncation_values, nv)


def td_residuals(batch: TransitionBatch, gamma: float) -> np.ndarray:
    not_term = 1.0 - batch.terminated.astype(np.float64)
    return batch.rewards + gamma * not_term * next_values(batch) - batch.values


def compute_gae(batch: TransitionBatch, gamma: float, lam: float) -> AdvantageEstimate:
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("gamma and lambda must lie in [0, 1]")
    shape = batch.rewards.shape
    for name in ("terminated", "truncated", "values", "truncation_values"):
        if getattr(batch, name).shape != shape:
            raise ValueError(f"{name} has shape {getattr(batch, name).shape}, expected {shape}")
    if batch.bootstrap_values.shape != shape[1:]:
        raise ValueError("bootstrap_values must have one entry per env")
    delta = td_residuals(batch, gamma)
    cont = 1.0 - (batch.terminated | batch.truncated).astype(np.float64)
    adv = np.empty_like(delta)
    running = np.zeros(shape[1])
    for t in range(shape[0] - 1, -1, -1):
        running = delta[t] + gamma * lam * cont[t] * running
        adv[t] = running
    if not np.all(np.isfinite(adv)):
        raise NumericalError("non-finite advantages")
    return AdvantageEstimate(adv, adv + batch.values, gamma, lam)


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Zero mean, unit (population) std; a constant batch maps to zeros."""
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size < 2:
        raise ValueError("normalization needs at least 2 advantages")
    std = float(adv.std())
    if std <= eps:
        return np.zeros_like(adv)
    return (adv - adv.mean()) / std
