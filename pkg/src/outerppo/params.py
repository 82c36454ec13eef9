"""Flat parameter vectors with a named segment layout."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import prod
from typing import NamedTuple

import numpy as np


class LayoutMismatchError(ValueError):
    pass


class Segment(NamedTuple):
    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return prod(self.shape)


@dataclass(frozen=True)
class Layout:
    segments: tuple[Segment, ...]

    @classmethod
    def from_shapes(cls, shapes) -> Layout:
        segs = []
        offset = 0
        for name, shape in shapes:
            shape = tuple(int(s) for s in shape)
            segs.append(Segment(name, offset, shape))
            offset += prod(shape)
        return cls(tuple(segs))

    @property
    def size(self) -> int:
        if not self.segments:
            return 0
        last = self.segments[-1]
        return last.offset + last.size

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.segments]

    def __getitem__(self, name: str) -> Segment:
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def describe(self) -> str:
        return "[" + ", ".join(f"{s.name}{list(s.shape)}" for s in self.segments) + "]"

    def to_list(self) -> list[dict]:
        return [{"name": s.name, "offset": s.offset, "shape": list(s.shape)} for s in self.segments]

    @classmethod
    def from_list(cls, items) -> Layout:
        return cls(tuple(Segment(d["name"], int(d["offset"]), tuple(d["shape"])) for d in items))

    def prefixed(self, prefix: str) -> tuple[int, int]:
        """(start, stop) of the contiguous run of segments whose name starts with ``prefix``."""
        hits = [s for s in self.segments if s.name.startswith(prefix)]
        if not hits:
            raise KeyError(prefix)
        start, stop = hits[0].offset, hits[-1].offset + hits[-1].size
        if sum(s.size for s in hits) != stop - start:
            raise ValueError(f"segments with prefix {prefix!r} are not contiguous")
        return start, stop


class ParamVector:
    """A float64 vector plus the layout that names its pieces."""

    __slots__ = ("data", "layout")

    def __init__(self, data, layout: Layout):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 1 or data.shape[0] != layout.size:
            raise ValueError(f"data of shape {data.shape} does not fit layout of size {layout.size}")
        self.data = data
        self.layout = layout

    @classmethod
    def zeros(cls, layout: Layout) -> ParamVector:
        return cls(np.zeros(layout.size), layout)

    def zeros_like(self) -> ParamVector:
        return ParamVector(np.zeros_like(self.data), self.layout)

    def copy(self) -> ParamVector:
        return ParamVector(self.data.copy(), self.layout)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        s = self.layout[name]
        return self.data[s.offset : s.offset + s.size].reshape(s.shape)

    def check_layout(self, other: ParamVector) -> None:
        if self.layout != other.layout:
            raise LayoutMismatchError(
                f"layout mismatch: {self.layout.describe()} vs {other.layout.describe()}"
            )

    def view(self, prefix: str) -> ParamVector:
        """The segments starting with ``prefix``, prefix stripped, sharing memory with ``self``."""
        start, stop = self.layout.prefixed(prefix)
        segs = [s for s in self.layout.segments if s.name.startswith(prefix)]
        layout = Layout.from_shapes([(s.name[len(prefix) :], s.shape) for s in segs])
        return ParamVector(self.data[start:stop], layout)

    def sub(self, prefix: str) -> ParamVector:
        """Like :meth:`view` but copied."""
        v = self.view(prefix)
        return ParamVector(v.data.copy(), v.layout)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.data, self.data)))

    def digest(self) -> str:
        return hashlib.sha256(self.data.tobytes()).hexdigest()[:16]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.layout == other.layout and self.data.tobytes() == other.data.tobytes()

    def __repr__(self) -> str:
        return f"ParamVector({self.layout.describe()}, norm={self.norm():.4g})"


def param_axpy(a: float, x: ParamVector, y: ParamVector) -> ParamVector:
    """Return ``a * x + y`` as a new vector."""
    x.check_layout(y)
    return ParamVector(a * x.data + y.data, x.layout)


def concat(parts: list[tuple[str, ParamVector]]) -> ParamVector:
    """Concatenate vectors, prefixing each segment name."""
    shapes = []
    for prefix, pv in parts:
        shapes.extend((prefix + s.name, s.shape) for s in pv.layout.segments)
    return ParamVector(np.concatenate([pv.data for _, pv in parts]), Layout.from_shapes(shapes))
