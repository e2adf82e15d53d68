"""Deterministic, platform-independent random sampling.

Every sampled subset in the toolkit (context sampling, manual-evaluation
instance sampling) uses the same documented scheme so results are
reproducible bit-for-bit across machines and reimplementable in any
language:

1. PRNG: splitmix64. State is a 64-bit unsigned integer seeded with the
   user seed (taken modulo 2**64). Each step adds the constant
   0x9E3779B97F4A7C15, then mixes:

       z = state
       z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2**64)
       z = (z ^ (z >> 27)) * 0x94D049BB133111EB   (mod 2**64)
       output = z ^ (z >> 31)

2. Bounded draws use rejection sampling to avoid modulo bias: for bound
   m, draw 64-bit values until one is below 2**64 - (2**64 % m), then
   return it modulo m.

3. k-subset selection is a partial Fisher-Yates shuffle over the index
   array [0, n): for i in 0..k-1 swap index i with index i + draw(n - i).
   The first k entries are the selected indices; they are then sorted
   ascending so the sample preserves the population's original order.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

from .errors import SampleSizeError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

T = TypeVar("T")


class SplitMix64:
    """The splitmix64 generator, as specified in the module docstring."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, bound: int) -> int:
        """Uniform draw in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound


def sample_indices(n: int, k: int, seed: int) -> list[int]:
    """Select k of n indices uniformly without replacement, sorted ascending."""
    if k > n:
        raise SampleSizeError(k, n)
    rng = SplitMix64(seed)
    indices = list(range(n))
    for i in range(k):
        j = i + rng.next_below(n - i)
        indices[i], indices[j] = indices[j], indices[i]
    return sorted(indices[:k])


def sample_preserving_order(items: Sequence[T], k: int, seed: int) -> list[T]:
    """Uniform k-subset of `items`, keeping their original relative order."""
    return [items[i] for i in sample_indices(len(items), k, seed)]
