"""Vectorized episodic environments.

An environment object holds only constants; all mutable state lives in an
:class:`EnvState` value that carries one row per parallel slot.  Every slot
owns its own random stream, so slot ``i`` of an N-slot state behaves exactly
like a 1-slot state created with the same stream key.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import Streams, derive


@dataclass(frozen=True)
class EnvSpec:
    id: str
    obs_dim: int
    action_kind: str  # "discrete" or "box"
    action_dim: int  # number of actions (discrete) or action dimensions (box)
    max_episode_steps: int
    reward_range_hint: tuple[float, float]
    action_low: float = 0.0
    action_high: float = 0.0

    def __post_init__(self):
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")
        if self.action_kind == "discrete" and self.action_dim < 2:
            raise ValueError("discrete action spaces need at least 2 actions")
        if self.action_kind not in ("discrete", "box"):
            raise ValueError(f"unknown action kind {self.action_kind!r}")


@dataclass
class EnvState:
    phys: np.ndarray  # [N, k] environment-specific state
    steps: np.ndarray  # [N] steps elapsed in the current episode
    streams: Streams  # one stream per slot
    clamp_count: int = 0  # out-of-bounds continuous actions clamped so far

    def __len__(self) -> int:
        return self.phys.shape[0]

    def copy(self) -> EnvState:
        return EnvState(self.phys.copy(), self.steps.copy(), self.streams.copy(), self.clamp_count)


class Env:
    spec: EnvSpec

    def initial(self, streams: Streams, n: int) -> np.ndarray:
        raise NotImplementedError

    def dynamics(self, phys: np.ndarray, actions: np.ndarray, streams: Streams):
        """Return ``(phys', reward, terminated)`` for a batch of slots."""
        raise NotImplementedError

    def observe(self, phys: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- shared machinery -------------------------------------------------

    def slot_keys(self, seed: int, n: int) -> list[int]:
        return [derive(seed, "env", i) for i in range(n)]

    def reset(self, seed: int | None = None, n: int = 1, keys=None) -> tuple[EnvState, np.ndarray]:
        if keys is None:
            if seed is None:
                raise ValueError("reset needs a seed or explicit stream keys")
            keys = self.slot_keys(seed, n)
        streams = Streams.from_keys(keys)
        phys = self.initial(streams, len(streams))
        state = EnvState(phys, np.zeros(len(streams), dtype=np.int64), streams)
        return state, self.observe(phys)

    def reset_where(self, state: EnvState, mask: np.ndarray) -> tuple[EnvState, np.ndarray]:
        """Reset the slots in ``mask``; other slots keep their state and stream position."""
        new = state.copy()
        if np.any(mask):
            idx = np.flatnonzero(mask)
            sub = new.streams.subset(idx)
            new.phys[idx] = self.initial(sub, len(idx))
            new.streams.counters[idx] = sub.counters
            new.steps[idx] = 0
        return new, self.observe(new.phys)

    def check_actions(self, state: EnvState, actions) -> tuple[np.ndarray, int]:
        n = len(state)
        if self.spec.action_kind == "discrete":
            a = np.asarray(actions).reshape(n)
            if not np.issubdtype(a.dtype, np.integer):
                if np.any(a != np.floor(a)):
                    raise ValueError("discrete actions must be integers")
                a = a.astype(np.int64)
            if np.any(a < 0) or np.any(a >= self.spec.action_dim):
                raise ValueError(f"action index out of range [0, {self.spec.action_dim}) for {self.spec.id}")
            return a, 0
        a = np.asarray(actions, dtype=np.float64).reshape(n, self.spec.action_dim)
        clipped = np.clip(a, self.spec.action_low, self.spec.action_high)
        return clipped, int(np.count_nonzero(np.any(clipped != a, axis=-1)))

    def step(self, state: EnvState, actions):
        """Advance every slot one step; no automatic reset.

        Returns ``(state', obs, reward, terminated, truncated)`` where ``obs`` is
        the observation reached by this step.
        """
        a, clamped = self.check_actions(state, actions)
        new = state.copy()
        new.clamp_count += clamped
        phys, reward, terminated = self.dynamics(new.phys, a, new.streams)
        new.phys = phys
        new.steps = new.steps + 1
        terminated = np.asarray(terminated, dtype=bool)
        truncated = (new.steps >= self.spec.max_episode_steps) & ~terminated
        return new, self.observe(phys), np.asarray(reward, dtype=np.float64), terminated, truncated
