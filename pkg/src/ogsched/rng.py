"""Seeded, order-independent randomness.

Every random decision is drawn from a stream identified by a key path, e.g.
``(trial, "tau", machine)``.  Streams are numpy ``Philox`` generators (a
64-bit counter-based generator) keyed through ``SeedSequence`` spawn keys, so
the values a machine sees never depend on how many draws other machines made
or on the order in which trials are executed.
"""

from __future__ import annotations

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_int(part: Key) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError("stream keys must be nonnegative")
    return int(part)


class RandomSource:
    """A node in a tree of independent random streams."""

    __slots__ = ("seed", "path")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)

    def child(self, *key: Key) -> "RandomSource":
        return RandomSource(self.seed, self.path + tuple(_key_int(k) for k in key))

    def stream(self, *key: Key) -> np.random.Generator:
        path = self.path + tuple(_key_int(k) for k in key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=path)
        return np.random.Generator(np.random.Philox(ss))

    def uint64(self, *key: Key) -> int:
        return int(self.stream(*key).integers(0, 2**64, dtype=np.uint64))

    def coin(self, *key: Key) -> bool:
        return bool(self.uint64(*key) >> 63)

    def derive_seed(self, *key: Key) -> int:
        """A 63-bit integer seed for a sub-run (used for per-trial seeds)."""
        return self.uint64(*key) >> 1

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self.path})"


def leading_zeros64(u: int) -> int:
    return 64 - int(u).bit_length()
