"""Named configuration presets.

Three families:

* published per-task optima for the benchmark suites (baseline PPO values and
  the tuned outer-PPO hyperparameters), emitted as partial config trees that
  can be layered onto any run config;
* the outer-PPO sweep grids and the baseline search ranges, emitted as sweep
  specs;
* desk-scale run configs for the native environments.

Every preset is plain JSON; :func:`dumps` is the canonical serialization.
"""

from __future__ import annotations

import json

from .errors import ConfigError
from .metrics import NormalizationTable

PPO_COLUMNS = (
    "num_envs",
    "rollout_length",
    "num_epochs",
    "num_minibatches",
    "actor_lr",
    "critic_lr",
    "gamma",
    "gae_lambda",
    "clip_eps",
    "max_grad_norm",
    "reward_scale",
)

# fmt: off
BASELINE_OPTIMA = {
    "ant":             (128,   8,  2, 32, 3.0e-04, 1.4e-04, 0.98, 0.70, 0.21, 4.85,  0.14),
    "halfcheetah":     (64,   64,  3, 16, 3.9e-04, 4.4e-04, 0.99, 0.94, 0.13, 2.40,  0.46),
    "hopper":          (64,   64,  2, 64, 6.3e-04, 3.6e-04, 1.00, 0.96, 0.17, 3.54,  3.95),
    "humanoid":        (256,  64,  4, 64, 1.0e-04, 1.0e-04, 0.98, 0.89, 0.34, 3.30,  0.14),
    "humanoidstandup": (64,   64,  3, 32, 3.0e-04, 8.2e-04, 0.99, 0.98, 0.10, 4.65,  0.35),
    "walker2d":        (256,  32,  4, 64, 5.4e-04, 8.2e-04, 1.00, 0.92, 0.12, 3.74, 22.54),
    "asterix":         (128, 128,  3, 64, 8.3e-04, 2.1e-05, 1.00, 0.20, 0.30, 2.28,  6.62),
    "breakout":        (64,   16, 14, 16, 1.8e-04, 1.2e-04, 0.90, 0.53, 0.16, 0.25,  5.19),
    "freeway":         (64,  128, 10,  2, 6.9e-04, 1.3e-04, 0.98, 0.70, 0.15, 4.71,  6.64),
    "space_invaders":  (128,  32, 16,  2, 3.0e-05, 1.1e-04, 0.98, 1.00, 0.25, 0.35,  0.61),
    "game_2048":       (1024,  8,  9, 32, 4.9e-04, 3.8e-04, 0.99, 0.04, 0.28, 2.56,  0.13),
    "maze":            (256,  32,  7, 64, 6.5e-04, 4.3e-04, 0.98, 0.66, 0.14, 2.46,  1.97),
    "rubiks_cube":     (64,  256, 13,  4, 9.0e-04, 2.2e-04, 0.99, 0.55, 0.14, 3.45, 11.03),
    "snake":           (1024,  8, 11,  4, 6.0e-04, 6.0e-04, 1.00, 0.46, 0.12, 2.52, 20.48),
}

# task: (outer-lr sigma, nesterov sigma, nesterov mu, biased alpha, biased mu)
OUTER_OPTIMA = {
    "ant":             (0.5, 0.7, 0.2, 0.1, 0.8),
    "halfcheetah":     (0.5, 0.4, 0.5, 0.2, 0.8),
    "hopper":          (1.5, 0.9, 0.4, 0.5, 0.8),
    "humanoid":        (1.9, 0.5, 0.7, 0.1, 0.4),
    "humanoidstandup": (2.1, 0.5, 0.3, 0.5, 0.8),
    "walker2d":        (2.0, 0.9, 0.6, 0.4, 0.0),
    "game_2048":       (1.3, 0.8, 0.4, 0.3, 0.9),
    "snake":           (2.3, 1.0, 0.4, 0.7, 0.5),
    "rubiks_cube":     (1.7, 0.5, 0.7, 0.4, 0.3),
    "maze":            (0.9, 0.9, 0.0, 0.1, 0.5),
    "asterix":         (1.1, 0.6, 0.5, 0.1, 0.4),
    "breakout":        (1.1, 0.9, 0.1, 0.0, 0.5),
    "freeway":         (1.6, 0.9, 0.3, 0.2, 0.5),
    "space_invaders":  (1.3, 0.8, 0.2, 0.1, 0.9),
}

NORMALIZATION_ROWS = (
    ("ant",             -2958.14, 13466.48),
    ("halfcheetah",      -587.37,  7859.28),
    ("hopper",             21.03,  3697.39),
    ("humanoid",          207.63, 11851.71),
    ("humanoidstandup",  6686.00, 71897.67),
    ("walker2d",          -32.44,  2558.61),
    ("game_2048",         989.50, 29084.63),
    ("snake",               0.00,    92.55),
    ("rubiks_cube",         0.00,     0.66),
    ("maze",                0.03,     0.84),
    ("asterix",             0.30,    64.46),
    ("breakout",            0.00,    92.86),
    ("freeway",             0.00,    66.13),
    ("space_invaders",      0.00,   191.80),
)
# fmt: on

# Baseline search space: (low, high, scale).  "pow2" samples an integer
# exponent uniformly, "int" an integer uniformly, "log" log-uniformly.
BASELINE_RANGES = {
    "ppo.num_envs": (64, 1024, "pow2"),
    "ppo.rollout_length": (4, 256, "pow2"),
    "ppo.num_epochs": (1, 16, "int"),
    "ppo.num_minibatches": (1, 64, "pow2"),
    "ppo.actor_lr": (1e-5, 1e-3, "log"),
    "ppo.critic_lr": (1e-5, 1e-3, "log"),
    "ppo.gamma": (0.9, 1.0, "linear"),
    "ppo.gae_lambda": (0.0, 1.0, "linear"),
    "ppo.clip_eps": (0.1, 0.5, "linear"),
    "ppo.max_grad_norm": (0.1, 5.0, "linear"),
    "ppo.reward_scale": (0.1, 100.0, "log"),
}


def tenths(lo: float, hi: float) -> list[float]:
    """Grid from ``lo`` to ``hi`` inclusive in steps of 0.1, rounded to one decimal."""
    a, b = round(lo * 10), round(hi * 10)
    return [round(0.1 * i, 1) for i in range(a, b + 1)]


OUTER_GRIDS = {
    "outer-lr-grid": ("lr", [("outer.sigma", tenths(0.1, 4.0))]),
    "nesterov-grid": ("nesterov", [("outer.sigma", tenths(0.1, 1.0)), ("outer.mu", tenths(0.1, 0.9))]),
    "biased-grid": ("biased", [("outer.alpha", tenths(0.1, 1.0)), ("outer.mu", tenths(0.0, 0.9))]),
}


def paper_normalization() -> NormalizationTable:
    return NormalizationTable.from_rows(NORMALIZATION_ROWS)


def baseline_ppo(task: str) -> dict:
    return dict(zip(PPO_COLUMNS, BASELINE_OPTIMA[task]))


def outer_optimum(task: str, strategy: str) -> dict:
    lr, n_sigma, n_mu, b_alpha, b_mu = OUTER_OPTIMA[task]
    if strategy == "lr":
        return {"strategy": "lr", "sigma": lr, "mu": 0.0, "alpha": 0.0}
    if strategy == "nesterov":
        return {"strategy": "nesterov", "sigma": n_sigma, "mu": n_mu, "alpha": 0.0}
    if strategy == "biased":
        return {"strategy": "biased", "sigma": 1.0, "mu": b_mu, "alpha": b_alpha}
    raise ConfigError(f"no published optimum for strategy {strategy!r}")


# -- desk-scale presets ---------------------------------------------------------

_DESK_EVAL = {"num_intermediate_evals": 20, "eval_episodes": 64, "absolute_eval_episodes": 1280}

DESK_PRESETS = {
    "chain-mdp": {
        "env": "chain-mdp",
        "total_transitions": 200_000,
        **_DESK_EVAL,
        "network": {"hidden": [32, 32], "activation": "tanh"},
        "ppo": {"num_envs": 8, "rollout_length": 64, "num_epochs": 4, "num_minibatches": 4, "gamma": 0.99,
                "gae_lambda": 0.95, "actor_lr": 1e-3, "critic_lr": 1e-3, "clip_eps": 0.2, "max_grad_norm": 0.5},
    },
    "cartpole-discrete": {
        "env": "cartpole-discrete",
        "total_transitions": 1_000_000,
        **_DESK_EVAL,
        "ppo": {"num_envs": 16, "rollout_length": 128, "num_epochs": 4, "num_minibatches": 8, "gamma": 0.99,
                "gae_lambda": 0.95, "actor_lr": 3e-4, "critic_lr": 3e-4, "clip_eps": 0.2, "max_grad_norm": 0.5},
    },
    "cartpole-small-clip": {
        "env": "cartpole-discrete",
        "total_transitions": 200_000,
        "num_intermediate_evals": 10,
        "eval_episodes": 32,
        "absolute_eval_episodes": 256,
        "ppo": {"num_envs": 16, "rollout_length": 128, "num_epochs": 4, "num_minibatches": 8, "gamma": 0.99,
                "gae_lambda": 0.95, "actor_lr": 3e-4, "critic_lr": 3e-4, "clip_eps": 0.1, "max_grad_norm": 0.5},
    },
    "pendulum-continuous": {
        "env": "pendulum-continuous",
        "total_transitions": 1_000_000,
        **_DESK_EVAL,
        "ppo": {"num_envs": 16, "rollout_length": 256, "num_epochs": 10, "num_minibatches": 16, "gamma": 0.95,
                "gae_lambda": 0.9, "actor_lr": 1e-3, "critic_lr": 1e-3, "clip_eps": 0.2, "max_grad_norm": 0.5,
                "reward_scale": 0.1},
    },
    "maze-grid": {
        "env": "maze-grid",
        "total_transitions": 300_000,
        **_DESK_EVAL,
        "ppo": {"num_envs": 16, "rollout_length": 64, "num_epochs": 4, "num_minibatches": 4, "gamma": 0.97,
                "gae_lambda": 0.9, "actor_lr": 1e-3, "critic_lr": 1e-3, "clip_eps": 0.2, "max_grad_norm": 0.5},
    },
}


# -- registry ---------------------------------------------------------------------


def _task_presets() -> dict[str, dict]:
    out = {}
    for task in BASELINE_OPTIMA:
        name = task.replace("_", "-")
        ppo = baseline_ppo(task)
        out[f"{name}-baseline"] = {"ppo": ppo}
        for strategy, suffix in (("lr", "outer-lr"), ("nesterov", "nesterov"), ("biased", "biased")):
            out[f"{name}-{suffix}"] = {"ppo": ppo, "outer": outer_optimum(task, strategy)}
    return out


def _sweep_presets() -> dict[str, dict]:
    out = {}
    for name, (strategy, axes) in OUTER_GRIDS.items():
        out[name] = {
            "base": {"outer": {"strategy": strategy}},
            "axes": [[path, values] for path, values in axes],
            "mode": "grid",
            "seeds_per_trial": 4,
        }
    out["baseline-search"] = {
        "base": {},
        "ranges": {k: list(v) for k, v in BASELINE_RANGES.items()},
        "mode": "random",
        "trial_budget": 600,
        "seeds_per_trial": 4,
    }
    return out


def registry() -> dict[str, dict]:
    reg = {}
    reg.update(DESK_PRESETS)
    reg.update(_task_presets())
    reg.update(_sweep_presets())
    reg["normalization-table"] = {"rows": [list(r) for r in NORMALIZATION_ROWS]}
    return reg


def names() -> list[str]:
    return sorted(registry())


def get(name: str) -> dict:
    reg = registry()
    if name not in reg:
        raise ConfigError(f"unknown preset {name!r}; available presets:\n  " + "\n  ".join(sorted(reg)))
    return json.loads(json.dumps(reg[name]))


def kind(name: str) -> str:
    if name in DESK_PRESETS:
        return "run"
    if name in OUTER_GRIDS or name == "baseline-search":
        return "sweep"
    if name == "normalization-table":
        return "table"
    return "partial-run"


def dumps(tree: dict) -> str:
    return json.dumps(tree, indent=2, sort_keys=True) + "\n"
