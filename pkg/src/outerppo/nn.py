"""Batched MLPs with a hand-written reverse pass."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import Layout, ParamVector
from .rng import Streams


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all MLP dimensions must be >= 1, got {dims}")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def num_layers(self) -> int:
        return len(self.hidden) + 1

    def shapes(self, prefix: str = "") -> list[tuple[str, tuple[int, ...]]]:
        out = []
        d = self.dims
        for i in range(self.num_layers):
            out.append((f"{prefix}w{i}", (d[i], d[i + 1])))
            out.append((f"{prefix}b{i}", (d[i + 1],)))
        return out

    def layout(self) -> Layout:
        return Layout.from_shapes(self.shapes())


@dataclass
class Tape:
    spec: MlpSpec
    weights: list[np.ndarray]
    inputs: list[np.ndarray] = field(default_factory=list)  # input of each layer
    pre: list[np.ndarray] = field(default_factory=list)  # pre-activations of hidden layers
    squeeze: bool = False


def _layers(spec: MlpSpec, params: ParamVector):
    return [(params[f"w{i}"], params[f"b{i}"]) for i in range(spec.num_layers)]


def mlp_forward(spec: MlpSpec, params: ParamVector, x) -> tuple[np.ndarray, Tape]:
    """Forward pass over a batch ``x[B, input_dim]`` (a single vector is also accepted)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[-1] != spec.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, MLP expects {spec.input_dim}")
    layers = _layers(spec, params)
    tape = Tape(spec, [w for w, _ in layers], squeeze=squeeze)
    h = x
    for i, (w, b) in enumerate(layers):
        tape.inputs.append(h)
        z = h @ w + b
        if i < spec.num_layers - 1:
            tape.pre.append(z)
            h = np.tanh(z) if spec.activation == "tanh" else np.maximum(z, 0.0)
        else:
            h = z
    return (h[0] if squeeze else h), tape


def mlp_backward(tape: Tape, output_grad) -> tuple[ParamVector, np.ndarray]:
    """Gradient of ``sum(output * output_grad)`` w.r.t. the parameters and the input."""
    spec = tape.spec
    g = np.asarray(output_grad, dtype=np.float64)
    if tape.squeeze and g.ndim == 1:
        g = g[None, :]
    batch = tape.inputs[0].shape[0]
    if g.shape != (batch, spec.output_dim):
        raise ValueError(f"output_grad shape {g.shape} does not match tape output {(batch, spec.output_dim)}")
    grads: list[np.ndarray] = [None] * (2 * spec.num_layers)
    for i in range(spec.num_layers - 1, -1, -1):
        grads[2 * i] = tape.inputs[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ tape.weights[i].T
        if i > 0:
            if spec.activation == "tanh":
                a = tape.inputs[i]
                g = g * (1.0 - a * a)
            else:
                g = g * (tape.pre[i - 1] > 0.0)
    flat = np.concatenate([x.ravel() for x in grads])
    input_grad = g[0] if tape.squeeze else g
    return ParamVector(flat, spec.layout()), input_grad


def orthogonal(streams: Streams, rows: int, cols: int, gain: float) -> np.ndarray:
    """Orthogonal matrix init from the package RNG (QR of a Gaussian matrix, sign-fixed)."""
    flat = streams.normal_block(rows * cols)[0]
    a = flat.reshape(max(rows, cols), min(rows, cols))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q


def init_mlp(spec: MlpSpec, streams: Streams, hidden_gain: float = 1.0, output_gain: float = 1.0) -> ParamVector:
    parts = []
    d = spec.dims
    for i in range(spec.num_layers):
        gain = output_gain if i == spec.num_layers - 1 else hidden_gain
        parts.append(orthogonal(streams, d[i], d[i + 1], gain).ravel())
        parts.append(np.zeros(d[i + 1]))
    return ParamVector(np.concatenate(parts), spec.layout())
