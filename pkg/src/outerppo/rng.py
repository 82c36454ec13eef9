"""Counter-based, splittable random streams.

Every random draw in the package is a pure function of a 64-bit key and a
64-bit counter::

    bits(key, n) = mix64(key + (n + 1) * GOLDEN)      (mod 2**64)

which is exactly the n-th output of a SplitMix64 generator seeded with
``key``.  Keys are split with :func:`derive`, so a seed written in a config
file names the same streams in any implementation that follows these three
definitions:

* ``mix64`` is the SplitMix64 finalizer (Stafford variant 13).
* ``derive(key, label) = mix64((key + GOLDEN) ^ mix64(label))`` where string
  labels are first mapped to the little-endian integer of their 8-byte
  BLAKE2b digest.
* a uniform double is ``(bits >> 11) * 2**-53``; a standard normal uses
  Box-Muller on two consecutive uniforms ``u1, u2``:
  ``sqrt(-2 log(1 - u1)) * cos(2 pi u2)``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)


def mix64_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _label_int(label: int | str) -> int:
    if isinstance(label, str):
        return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")
    if label < 0:
        raise ValueError(f"stream labels must be non-negative, got {label}")
    return label & MASK64


def derive(key: int, *labels: int | str) -> int:
    """Split ``key`` along a path of labels into an independent child key."""
    key &= MASK64
    for label in labels:
        key = mix64_int(((key + GOLDEN) & MASK64) ^ mix64_int(_label_int(label)))
    return key


def mix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1_U
        z = (z ^ (z >> np.uint64(27))) * _M2_U
    return z ^ (z >> np.uint64(31))


def bits(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return mix64(keys + (counters + np.uint64(1)) * _GOLDEN_U)


def to_unit(b: np.ndarray) -> np.ndarray:
    return (b >> np.uint64(11)).astype(np.float64) * (2.0**-53)


@dataclass
class Streams:
    """A bank of independent streams, one (key, counter) pair per slot.

    Draws advance the counters in place; :meth:`copy` snapshots a bank.
    """

    keys: np.ndarray
    counters: np.ndarray

    @classmethod
    def from_keys(cls, keys) -> Streams:
        if isinstance(keys, np.ndarray):
            keys = keys.astype(np.uint64).ravel().tolist()
        elif isinstance(keys, int):
            keys = [keys]
        keys = np.array([int(k) & MASK64 for k in keys], dtype=np.uint64)
        return cls(keys, np.zeros(keys.shape, dtype=np.uint64))

    @classmethod
    def single(cls, key: int) -> Streams:
        return cls.from_keys([key])

    def __len__(self) -> int:
        return len(self.keys)

    def copy(self) -> Streams:
        return Streams(self.keys.copy(), self.counters.copy())

    def subset(self, idx) -> Streams:
        return Streams(self.keys[idx].copy(), self.counters[idx].copy())

    def uniform(self, mask: np.ndarray | None = None) -> np.ndarray:
        """One uniform per slot. Slots outside ``mask`` are not advanced."""
        u = to_unit(bits(self.keys, self.counters))
        if mask is None:
            self.counters += np.uint64(1)
        else:
            self.counters[mask] += np.uint64(1)
        return u

    def normal(self, mask: np.ndarray | None = None) -> np.ndarray:
        u1 = self.uniform(mask)
        u2 = self.uniform(mask)
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def uniform_block(self, n: int) -> np.ndarray:
        """``n`` consecutive uniforms from each slot, shape ``(slots, n)``."""
        offs = np.arange(n, dtype=np.uint64)
        u = to_unit(bits(self.keys[:, None], self.counters[:, None] + offs[None, :]))
        self.counters += np.uint64(n)
        return u

    def normal_block(self, n: int) -> np.ndarray:
        u = self.uniform_block(2 * n)
        return np.sqrt(-2.0 * np.log1p(-u[:, 0::2])) * np.cos(2.0 * np.pi * u[:, 1::2])

    def permutation(self, n: int) -> np.ndarray:
        """Permutation of ``range(n)`` from the first slot (argsort of uniforms)."""
        u = self.subset(slice(0, 1))
        perm = np.argsort(u.uniform_block(n)[0], kind="stable")
        self.counters[0] = u.counters[0]
        return perm
