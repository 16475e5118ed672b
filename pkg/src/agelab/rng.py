"""Counter-based SplitMix64 random source.

Every draw is a pure function of ``(seed, counter)``::

    z = seed + counter * 0x9E3779B97F4A7C15          (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9         (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB         (mod 2**64)
    z = z ^ (z >> 31)

with ``counter`` starting at 1 and incremented once per 64-bit output.  Floats
are ``(z >> 11) * 2**-53``.  Normals use Box-Muller on consecutive pairs of
uniforms (cosine branch only, one normal per pair).  Substreams are keyed by
the 64-bit FNV-1a hash of a UTF-8 name: ``seed' = mix(seed ^ fnv1a(name))``.

Because the stream is counter based, batched draws are computed in numpy with
wrapping uint64 arithmetic and agree bit-for-bit with scalar draws.
"""

from __future__ import annotations

import math

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_TWO_POW_M53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(name: str) -> int:
    h = FNV_OFFSET
    for byte in name.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Seedable, splittable generator with a numpy-like subset of methods."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & MASK64
        self.counter = int(counter)

    def __repr__(self) -> str:
        return f"SplitMix64(seed={self.seed:#x}, counter={self.counter})"

    def spawn(self, name: str) -> "SplitMix64":
        """Independent substream derived from this generator's seed and ``name``."""
        return SplitMix64(mix64(self.seed ^ fnv1a64(name)))

    # -- raw outputs -----------------------------------------------------

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * GOLDEN_GAMMA)

    def u64_array(self, n: int) -> np.ndarray:
        start = self.counter + 1
        self.counter += n
        counters = np.arange(start, start + n, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + counters * np.uint64(GOLDEN_GAMMA)
            return _mix64_array(z)

    # -- distributions ---------------------------------------------------

    def random(self, size=None):
        """Uniform floats in [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * _TWO_POW_M53
        n = int(np.prod(size))
        out = (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
        return out.reshape(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return low + (high - low) * self.random(size)

    def integers(self, high: int, size=None):
        """Integers in [0, high), by scaling a uniform float."""
        if size is None:
            return min(int(self.random() * high), high - 1)
        return np.minimum((self.random(size) * high).astype(np.int64), high - 1)

    def normal(self, loc=0.0, scale=1.0, size=None):
        if size is None:
            u1 = self.random()
            u2 = self.random()
            return loc + scale * math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)
        n = int(np.prod(size))
        u = self.random(2 * n)
        z = np.sqrt(-2.0 * np.log1p(-u[0::2])) * np.cos(2.0 * np.pi * u[1::2])
        return (loc + scale * z).reshape(size)

    def categorical(self, probs) -> int:
        """One index drawn from a probability vector."""
        u = self.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        # u landed in the rounding slack above the cumulative sum
        for i in range(len(probs) - 1, -1, -1):
            if probs[i] > 0:
                return i
        raise ValueError("probability vector has no positive entry")

    def bernoulli(self, p: float) -> bool:
        return self.random() < p
