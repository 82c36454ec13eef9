import numpy as np
import pytest

from outerppo.agent import ActorCritic
from outerppo.envs import EnvSpec


def small_agent(kind="categorical", obs_dim=3, n_actions=3, hidden=(5,), activation="tanh"):
    if kind == "categorical":
        spec = EnvSpec("toy", obs_dim, "discrete", n_actions, 10, (0.0, 1.0))
    else:
        spec = EnvSpec("toy", obs_dim, "box", n_actions, 10, (0.0, 1.0), -1.0, 1.0)
    return ActorCritic.for_env(spec, hidden, activation)


def central_difference(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def assert_rel_close(analytic, numeric, rel=1e-4, floor=1e-6):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    err = np.abs(analytic - numeric) / scale
    assert err.max() < rel, f"max relative error {err.max():.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
