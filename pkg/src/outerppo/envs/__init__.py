from ..errors import ConfigError
from .base import Env, EnvSpec, EnvState
from .tasks import CartPole, ChainMDP, MazeGrid, Pendulum

REGISTRY = {
    "chain-mdp": ChainMDP,
    "cartpole-discrete": CartPole,
    "pendulum-continuous": Pendulum,
    "maze-grid": MazeGrid,
}


def make_env(env_id: str) -> Env:
    try:
        return REGISTRY[env_id]()
    except KeyError:
        raise ConfigError(f"unknown env id {env_id!r}; known: {', '.join(sorted(REGISTRY))}") from None


def env_reset(env_id: str, seed: int, n: int = 1):
    env = make_env(env_id)
    state, obs = env.reset(seed, n)
    return env, state, obs


__all__ = ["Env", "EnvSpec", "EnvState", "REGISTRY", "make_env", "env_reset", "ChainMDP", "CartPole", "Pendulum", "MazeGrid"]
