"""Seeded end-to-end training runs with intermediate and absolute evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import checkpoint
from .adam import AdamState
from .agent import ActorCritic
from .config import RunConfig
from .envs import Env, make_env
from .errors import CheckpointFormatError, NumericalError
from .heads import sample
from .inner import inner_optimization_loop, make_optimizers
from .outer import OuterState, biased_iteration_bias, outer_step
from .params import Layout, ParamVector
from .rng import Streams, derive
from .rollout import RolloutCarry, collect_rollout, compute_gae, start_carry

log = logging.getLogger(__name__)


def evaluate_policy(agent: ActorCritic, theta: ParamVector, env: Env | str, episodes: int, eval_seed: int) -> np.ndarray:
    """Raw undiscounted returns of ``episodes`` episodes sampled from ``pi(theta)``.

    Episode ``i`` uses env stream ``derive(eval_seed, "env", i)`` and action
    stream ``derive(eval_seed, "action", i)``; all episodes run side by side.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if isinstance(env, str):
        env = make_env(env)
    carry = start_carry(env, eval_seed, episodes)
    actor, _ = agent.split(theta)
    state, obs = carry.env_state, carry.obs
    returns = np.zeros(episodes)
    active = np.ones(episodes, dtype=bool)
    while active.any():
        dist, _ = agent.dist_params(actor, obs)
        actions = sample(agent.head, dist, carry.streams)
        state, obs, reward, terminated, truncated = env.step(state, actions)
        returns += np.where(active, reward, 0.0)
        active &= ~(terminated | truncated)
    return returns


@dataclass
class RunResult:
    config: RunConfig
    eval_transitions: list[int]
    eval_means: list[float]
    best_index: int
    best_theta: ParamVector
    final_theta: ParamVector
    absolute_returns: np.ndarray | None
    completed: bool
    nan_aborted: bool
    iterations: int
    events: list[dict] = field(default_factory=list)

    @property
    def best_eval_mean(self) -> float:
        return self.eval_means[self.best_index]

    @property
    def absolute_mean(self) -> float | None:
        return None if self.absolute_returns is None else float(np.mean(self.absolute_returns))

    def diagnostics(self) -> list[dict]:
        return [e for e in self.events if e["event"] == "iteration"]

    def summary(self) -> dict:
        cfg = self.config
        ab = self.absolute_returns
        return {
            "env": cfg.env,
            "seed": cfg.seed,
            "method": cfg.method,
            "status": "completed" if self.completed else "nan_aborted",
            "completed": self.completed,
            "nan_aborted": self.nan_aborted,
            "iterations": self.iterations,
            "transitions": self.iterations * cfg.ppo.batch_size,
            "eval_curve": [[t, m] for t, m in zip(self.eval_transitions, self.eval_means)],
            "best_index": self.best_index,
            "best_eval_mean": self.best_eval_mean,
            "final_eval_mean": self.eval_means[-1],
            "absolute_episodes": 0 if ab is None else int(len(ab)),
            "absolute_mean": self.absolute_mean,
            "absolute_std": None if ab is None else float(np.std(ab)),
            "absolute_returns": None if ab is None else [float(x) for x in ab],
        }


class Trainer:
    """Holds every piece of mutable run state so a run can be checkpointed and resumed."""

    def __init__(self, config: RunConfig, on_event=None):
        self.config = config.validate()
        self.on_event = on_event
        self.env = make_env(config.env)
        self.agent = ActorCritic.for_env(self.env.spec, config.network.hidden, config.network.activation)
        ppo = config.ppo
        train_key = derive(config.seed, "train")
        self.eval_seed = config.eval_seed if config.eval_seed is not None else derive(config.seed, "eval")
        self.theta = self.agent.init_params(derive(config.seed, "init"))
        self.carry = start_carry(self.env, derive(train_key, "rollout"), ppo.num_envs)
        self.shuffle = Streams.single(derive(train_key, "shuffle"))
        self.total_updates = config.num_iterations * ppo.num_epochs * ppo.num_minibatches
        self.adam_actor, self.adam_critic = make_optimizers(self.agent, ppo, self.total_updates)
        self.outer = config.outer.state()
        self.iteration = 0
        self.eval_target = 0
        self.eval_transitions: list[int] = []
        self.eval_means: list[float] = []
        self.best_index = -1
        self.best_theta = self.theta.copy()
        self.absolute_returns: np.ndarray | None = None
        self.status = "running"
        self.events: list[dict] = []

    # -- bookkeeping -------------------------------------------------------

    @property
    def transitions(self) -> int:
        return self.iteration * self.config.ppo.batch_size

    @property
    def done(self) -> bool:
        return self.status != "running"

    def _emit(self, event: dict) -> None:
        self.events.append(event)
        if self.on_event is not None:
            self.on_event(event)

    def evaluate(self, theta: ParamVector, episodes: int, key: int) -> np.ndarray:
        returns = evaluate_policy(self.agent, theta, self.env, episodes, key)
        if not np.all(np.isfinite(returns)):
            raise NumericalError("non-finite evaluation return")
        return returns

    def _eval_point(self) -> None:
        # Intermediate evaluations share one episode set so checkpoints are compared on equal terms.
        returns = self.evaluate(self.theta, self.config.eval_episodes, derive(self.eval_seed, "intermediate"))
        mean = float(np.mean(returns))
        index = len(self.eval_means)
        self.eval_transitions.append(self.transitions)
        self.eval_means.append(mean)
        if self.best_index < 0 or mean > self.eval_means[self.best_index]:
            self.best_index = index
            self.best_theta = self.theta.copy()
        self._emit(
            {
                "event": "eval",
                "index": index,
                "iteration": self.iteration,
                "transitions": self.transitions,
                "mean_return": mean,
                "std_return": float(np.std(returns)),
            }
        )

    # -- one outer iteration ---------------------------------------------

    def step(self) -> None:
        cfg = self.config.ppo
        batch, carry = collect_rollout(self.agent, self.theta, self.env, self.carry, cfg.rollout_length, cfg.reward_scale)
        estimate = compute_gae(batch, cfg.gamma, cfg.gae_lambda)
        start = self.theta
        if self.outer.strategy == "biased":
            start = biased_iteration_bias(self.theta, self.outer)
        if self.config.reset_adam_each_iteration:
            self.adam_actor = _fresh_moments(self.adam_actor)
            self.adam_critic = _fresh_moments(self.adam_critic)
        theta_star, self.adam_actor, self.adam_critic, inner_diag = inner_optimization_loop(
            self.agent, start, batch, estimate, cfg, self.adam_actor, self.adam_critic, self.shuffle
        )
        new_theta, self.outer, outer_diag = outer_step(self.outer, self.theta, theta_star)
        if not np.all(np.isfinite(new_theta.data)):
            raise NumericalError("non-finite parameters after outer update")
        self.theta = new_theta
        self.carry = carry
        self.iteration += 1
        self._emit(
            {
                "event": "iteration",
                "iteration": self.iteration,
                "transitions": self.transitions,
                **outer_diag,
                **inner_diag,
                "actor_lr": self.adam_actor.effective_lr(),
                "critic_lr": self.adam_critic.effective_lr(),
                "theta_digest": self.theta.digest(),
            }
        )

    def run(self, max_iterations: int | None = None) -> RunResult | None:
        """Train to completion (or for ``max_iterations`` more iterations, returning None if unfinished)."""
        cfg = self.config
        n_iter = cfg.num_iterations
        stop_at = n_iter if max_iterations is None else min(n_iter, self.iteration + max_iterations)
        try:
            if not self.eval_means:
                self._eval_point()
            while self.iteration < stop_at:
                self.step()
                target = min(cfg.num_intermediate_evals, self.transitions * cfg.num_intermediate_evals // cfg.total_transitions)
                if target > self.eval_target or self.iteration == n_iter:
                    self.eval_target = max(target, self.eval_target)
                    self._eval_point()
            if self.iteration < n_iter:
                return None
            self.absolute_returns = self.evaluate(
                self.best_theta, cfg.absolute_eval_episodes, derive(self.eval_seed, "absolute")
            )
            self.status = "completed"
            self._emit(
                {
                    "event": "absolute",
                    "best_index": self.best_index,
                    "episodes": cfg.absolute_eval_episodes,
                    "mean_return": float(np.mean(self.absolute_returns)),
                    "std_return": float(np.std(self.absolute_returns)),
                }
            )
        except NumericalError as e:
            log.warning("run aborted at iteration %d: %s", self.iteration, e)
            self.status = "nan_aborted"
            self._emit({"event": "abort", "iteration": self.iteration, "reason": str(e)})
        return self.result()

    def result(self) -> RunResult:
        return RunResult(
            config=self.config,
            eval_transitions=list(self.eval_transitions),
            eval_means=list(self.eval_means),
            best_index=max(self.best_index, 0),
            best_theta=self.best_theta.copy(),
            final_theta=self.theta.copy(),
            absolute_returns=None if self.absolute_returns is None else self.absolute_returns.copy(),
            completed=self.status == "completed",
            nan_aborted=self.status == "nan_aborted",
            iterations=self.iteration,
            events=list(self.events),
        )

    # -- checkpointing -----------------------------------------------------

    def state_dict(self) -> tuple[dict[str, np.ndarray], dict]:
        env_state = self.carry.env_state
        arrays = {
            "theta": self.theta.data,
            "best_theta": self.best_theta.data,
            "adam_actor/m1": self.adam_actor.m1,
            "adam_actor/m2": self.adam_actor.m2,
            "adam_critic/m1": self.adam_critic.m1,
            "adam_critic/m2": self.adam_critic.m2,
            "env/phys": env_state.phys,
            "env/steps": env_state.steps,
            "env/keys": env_state.streams.keys,
            "env/counters": env_state.streams.counters,
            "rollout/obs": self.carry.obs,
            "action/keys": self.carry.streams.keys,
            "action/counters": self.carry.streams.counters,
            "shuffle/keys": self.shuffle.keys,
            "shuffle/counters": self.shuffle.counters,
        }
        if self.outer.momentum is not None:
            arrays["outer/momentum"] = self.outer.momentum
        if self.absolute_returns is not None:
            arrays["absolute_returns"] = self.absolute_returns
        meta = {
            "kind": "trainer",
            "config": self.config.to_dict(),
            "layout": self.theta.layout.to_list(),
            "iteration": self.iteration,
            "eval_target": self.eval_target,
            "eval_transitions": self.eval_transitions,
            "eval_means": self.eval_means,
            "best_index": self.best_index,
            "status": self.status,
            "clamp_count": env_state.clamp_count,
            "adam_actor_steps": self.adam_actor.step_count,
            "adam_critic_steps": self.adam_critic.step_count,
            "outer": {k: getattr(self.outer, k) for k in ("strategy", "sigma", "mu", "alpha", "k")},
            "events": self.events,
        }
        return arrays, meta

    def save(self, path) -> None:
        arrays, meta = self.state_dict()
        checkpoint.save(path, arrays, meta)

    @classmethod
    def load(cls, path, on_event=None) -> Trainer:
        arrays, meta = checkpoint.load(path)
        if meta.get("kind") != "trainer":
            raise CheckpointFormatError(f"{path} is not a trainer checkpoint")
        t = cls(RunConfig.from_dict(meta["config"]), on_event=on_event)
        layout = Layout.from_list(meta["layout"])
        if layout != t.theta.layout:
            raise CheckpointFormatError("checkpoint layout does not match the configured network")
        t.theta = ParamVector(arrays["theta"], layout)
        t.best_theta = ParamVector(arrays["best_theta"], layout)
        t.adam_actor = replace(t.adam_actor, m1=arrays["adam_actor/m1"], m2=arrays["adam_actor/m2"], step_count=meta["adam_actor_steps"])
        t.adam_critic = replace(t.adam_critic, m1=arrays["adam_critic/m1"], m2=arrays["adam_critic/m2"], step_count=meta["adam_critic_steps"])
        env_state = t.carry.env_state
        env_state.phys = arrays["env/phys"]
        env_state.steps = arrays["env/steps"]
        env_state.streams = Streams(arrays["env/keys"], arrays["env/counters"])
        env_state.clamp_count = meta["clamp_count"]
        t.carry = RolloutCarry(env_state, arrays["rollout/obs"], Streams(arrays["action/keys"], arrays["action/counters"]))
        t.shuffle = Streams(arrays["shuffle/keys"], arrays["shuffle/counters"])
        o = meta["outer"]
        t.outer = OuterState(o["strategy"], o["sigma"], o["mu"], o["alpha"], arrays.get("outer/momentum"), o["k"])
        t.iteration = meta["iteration"]
        t.eval_target = meta["eval_target"]
        t.eval_transitions = list(meta["eval_transitions"])
        t.eval_means = list(meta["eval_means"])
        t.best_index = meta["best_index"]
        t.status = meta["status"]
        t.absolute_returns = arrays.get("absolute_returns")
        t.events = list(meta["events"])
        return t


def _fresh_moments(state: AdamState) -> AdamState:
    return replace(state, m1=np.zeros_like(state.m1), m2=np.zeros_like(state.m2))


def train(config: RunConfig, on_event=None) -> RunResult:
    return Trainer(config, on_event=on_event).run()


def save_policy(path, config: RunConfig, theta: ParamVector) -> None:
    checkpoint.save(path, {"theta": theta.data}, {"kind": "policy", "config": config.to_dict(), "layout": theta.layout.to_list()})


def load_policy(path) -> tuple[RunConfig, ActorCritic, ParamVector]:
    arrays, meta = checkpoint.load(path)
    if "theta" not in arrays or "config" not in meta:
        raise CheckpointFormatError(f"{path} holds no policy parameters")
    config = RunConfig.from_dict(meta["config"])
    agent = ActorCritic.for_env(make_env(config.env).spec, config.network.hidden, config.network.activation)
    layout = Layout.from_list(meta["layout"])
    if layout != agent.layout():
        raise CheckpointFormatError("checkpoint layout does not match its config")
    return config, agent, ParamVector(arrays["theta"], layout)
