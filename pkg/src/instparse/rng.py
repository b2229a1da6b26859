"""SplitMix64, a portable 64-bit generator.

Output ``n`` (1-based) of a stream seeded with ``s`` is
``mix(s + n * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix`` is the
Stafford variant-13 finalizer. Because outputs depend only on the counter,
the same stream can be drawn one value at a time or as a numpy block.

Per-item seeds are derived with :func:`split`: item ``i`` of a batch seeded
with ``s`` uses the ``i + 1``-th output of the stream seeded with ``s``.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def split(seed: int, index: int) -> int:
    return mix64((seed + (index + 1) * GAMMA) & MASK64)


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * GAMMA) & MASK64)

    def u64_block(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            states = np.uint64(self.seed) + idx * np.uint64(GAMMA)
            return _mix64_array(states)

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_block(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def integer(self, low: int, high: int) -> int:
        """Integer in ``[low, high]`` inclusive (modulo reduction)."""
        if high < low:
            raise ValueError(f"empty range [{low}, {high}]")
        return low + self.next_u64() % (high - low + 1)

    def choice(self, seq):
        return seq[self.integer(0, len(seq) - 1)]

    def sample(self, population, k: int) -> list:
        """``k`` distinct items via a partial Fisher-Yates shuffle."""
        pool = list(population)
        if k > len(pool):
            raise ValueError(f"cannot sample {k} from {len(pool)} items")
        for i in range(k):
            j = self.integer(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
