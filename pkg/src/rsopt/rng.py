"""Deterministic, splittable randomness.

Every random consumer in a run owns its own stream, keyed by a
(seed, stream) pair fed to the counter-based Philox generator. Identical
pairs replay bit-identical sequences regardless of what other streams do,
which is what makes shared-noise comparisons between methods possible.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RngState",
    "make_generator",
    "stream_for",
    "PROJECTION_STREAM",
    "NOISE_STREAM",
]

_MASK64 = (1 << 64) - 1

# fixed stream ids for the run loop's two independent consumers
PROJECTION_STREAM = 1
NOISE_STREAM = 2


def make_generator(seed: int, stream: int) -> np.random.Generator:
    """Fresh generator for the given (seed, stream) pair."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def stream_for(label: str) -> int:
    """Stable stream id derived from a consumer label."""
    return zlib.crc32(label.encode("utf-8"))


@dataclass(frozen=True)
class RngState:
    """A (seed, stream) pair identifying one reproducible random sequence."""

    seed: int
    stream: int

    def make(self) -> np.random.Generator:
        return make_generator(self.seed, self.stream)
