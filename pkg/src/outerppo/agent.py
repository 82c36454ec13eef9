"""Separate actor and critic MLPs sharing one flat parameter vector.

Layout of the full vector: ``actor/w0, actor/b0, ..., [actor/log_std],
critic/w0, critic/b0, ...``.  Actor segments come first and are contiguous,
which is what lets each sub-network keep its own Adam instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import EnvSpec
from .heads import PolicyHead
from .nn import MlpSpec, Tape, init_mlp, mlp_backward, mlp_forward
from .params import Layout, ParamVector, concat
from .rng import Streams, derive


@dataclass(frozen=True)
class ActorCritic:
    actor: MlpSpec
    critic: MlpSpec
    head: PolicyHead

    @classmethod
    def for_env(cls, spec: EnvSpec, hidden=(64, 64), activation: str = "tanh") -> ActorCritic:
        hidden = tuple(hidden)
        if spec.action_kind == "discrete":
            head = PolicyHead("categorical", spec.action_dim)
        else:
            head = PolicyHead("gaussian", spec.action_dim)
        actor = MlpSpec(spec.obs_dim, hidden, head.dim, activation)
        critic = MlpSpec(spec.obs_dim, hidden, 1, activation)
        return cls(actor, critic, head)

    @property
    def gaussian(self) -> bool:
        return self.head.kind == "gaussian"

    def actor_layout(self) -> Layout:
        shapes = self.actor.shapes()
        if self.gaussian:
            shapes.append(("log_std", (self.head.dim,)))
        return Layout.from_shapes(shapes)

    def critic_layout(self) -> Layout:
        return self.critic.layout()

    def layout(self) -> Layout:
        shapes = [("actor/" + s.name, s.shape) for s in self.actor_layout().segments]
        shapes += [("critic/" + s.name, s.shape) for s in self.critic_layout().segments]
        return Layout.from_shapes(shapes)

    def init_params(self, seed: int) -> ParamVector:
        """Orthogonal init: gain 1 on hidden layers, 0.01 on the policy output, 1 on the value output."""
        a = init_mlp(self.actor, Streams.single(derive(seed, "init", "actor")), 1.0, 0.01)
        c = init_mlp(self.critic, Streams.single(derive(seed, "init", "critic")), 1.0, 1.0)
        if self.gaussian:
            a = ParamVector(np.concatenate([a.data, np.zeros(self.head.dim)]), self.actor_layout())
        return concat([("actor/", a), ("critic/", c)])

    def split(self, theta: ParamVector) -> tuple[ParamVector, ParamVector]:
        """Views of the actor and critic parts of ``theta``."""
        return theta.view("actor/"), theta.view("critic/")

    # -- actor -----------------------------------------------------------

    def dist_params(self, actor: ParamVector, obs: np.ndarray) -> tuple[np.ndarray, Tape]:
        out, tape = mlp_forward(self.actor, actor, obs)
        if out.ndim == 1:
            out = out[None, :]
        if self.gaussian:
            log_std = np.broadcast_to(actor["log_std"], out.shape)
            out = np.concatenate([out, log_std], axis=-1)
        return out, tape

    def actor_backward(self, tape: Tape, dparams: np.ndarray) -> ParamVector:
        """Actor gradient given d(objective)/d(dist_params) per row."""
        d = self.head.dim
        g, _ = mlp_backward(tape, dparams[:, :d])
        if self.gaussian:
            g = ParamVector(np.concatenate([g.data, dparams[:, d:].sum(axis=0)]), self.actor_layout())
        return g

    # -- critic ----------------------------------------------------------

    def values(self, critic: ParamVector, obs: np.ndarray) -> tuple[np.ndarray, Tape]:
        out, tape = mlp_forward(self.critic, critic, obs)
        return out.reshape(-1), tape

    def critic_backward(self, tape: Tape, dvalues: np.ndarray) -> ParamVector:
        g, _ = mlp_backward(tape, dvalues.reshape(-1, 1))
        return g
