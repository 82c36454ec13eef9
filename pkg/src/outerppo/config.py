"""Run configuration as a JSON tree with dotted-path overrides."""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .envs import REGISTRY
from .errors import ConfigError
from .inner import PpoConfig
from .outer import OuterState


@dataclass
class OuterConfig:
    strategy: str = "standard"
    sigma: float = 1.0
    mu: float = 0.0
    alpha: float = 0.0

    def state(self) -> OuterState:
        return OuterState(self.strategy, self.sigma, self.mu, self.alpha)


@dataclass
class NetworkConfig:
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    activation: str = "tanh"


@dataclass
class RunConfig:
    env: str = "chain-mdp"
    seed: int = 0
    eval_seed: int | None = None  # None: derived from seed
    total_transitions: int = 200_000
    num_intermediate_evals: int = 20
    eval_episodes: int = 128
    absolute_eval_episodes: int = 1280
    label: str | None = None  # method name used in reports; None: the outer strategy
    reset_adam_each_iteration: bool = False
    ppo: PpoConfig = field(default_factory=PpoConfig)
    outer: OuterConfig = field(default_factory=OuterConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)

    @property
    def method(self) -> str:
        return self.label or self.outer.strategy

    @property
    def num_iterations(self) -> int:
        return self.total_transitions // self.ppo.batch_size

    def validate(self) -> RunConfig:
        if self.env not in REGISTRY:
            raise ConfigError(f"unknown env id {self.env!r}; known: {', '.join(sorted(REGISTRY))}")
        self.ppo.validate()
        self.outer.state().validate()
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned value")
        if self.eval_seed is not None and not 0 <= self.eval_seed < 2**64:
            raise ConfigError("eval_seed must be a 64-bit unsigned value")
        if self.num_iterations < 1:
            raise ConfigError(
                f"total_transitions={self.total_transitions} is less than one iteration "
                f"({self.ppo.batch_size} transitions)"
            )
        if self.num_intermediate_evals < 1:
            raise ConfigError("num_intermediate_evals must be >= 1")
        if self.eval_episodes < 1 or self.absolute_eval_episodes < 1:
            raise ConfigError("evaluation episode counts must be >= 1")
        if not self.network.hidden or any(h < 1 for h in self.network.hidden):
            raise ConfigError("network.hidden must list positive layer widths")
        if self.network.activation not in ("tanh", "relu"):
            raise ConfigError("network.activation must be tanh or relu")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        return _build(cls, d, "")

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(d)


def _check_value(tp, value, where: str):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        for a in args:
            if a is type(None):
                continue
            try:
                return _check_value(a, value, where)
            except ConfigError:
                pass
        raise ConfigError(f"{where}: {value!r} does not match {tp}")
    if origin is list:
        (item,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return [_check_value(item, v, f"{where}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object, got {value!r}")
        return _build(tp, value, where + ".")
    raise ConfigError(f"{where}: unsupported type {tp}")


def _build(cls, d: dict, prefix: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in sorted(unknown))}")
    kwargs = {k: _check_value(hints[k], v, prefix + k) for k, v in d.items()}
    return cls(**kwargs)


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(tree: dict, overrides) -> dict:
    """Set dotted paths in a copy of ``tree``; every path must already exist."""
    tree = json.loads(json.dumps(tree))
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        node = tree
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"unknown config path {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config path {key!r}")
        node[parts[-1]] = value
    return tree


def resolve(base: dict | None = None, overrides=()) -> RunConfig:
    """Defaults, then ``base`` (partial tree), then overrides; validated."""
    tree = RunConfig().to_dict()
    if base:
        tree = _merge(tree, base)
    tree = apply_overrides(tree, overrides)
    return RunConfig.from_dict(tree).validate()


def _merge(tree: dict, patch: dict) -> dict:
    out = dict(tree)
    for k, v in patch.items():
        if k not in out:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(v, dict) and isinstance(out[k], dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out
