"""SplitMix64 stream and the shuffling/sampling helpers built on it.

Everything random in the toolkit goes through :class:`Rng` so that outputs are
bit-identical across platforms and Python versions (``random.Random`` makes no
such promise for ``shuffle``/``sample``).
"""

from __future__ import annotations

from typing import MutableSequence, Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class Rng:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by bitmask rejection on the high bits.

        ``n == 1`` returns 0 without advancing the stream.
        """
        if n <= 0:
            raise ValueError("bound must be positive")
        if n == 1:
            return 0
        bits = (n - 1).bit_length()
        while True:
            x = self.next_u64() >> (64 - bits)
            if x < n:
                return x

    def random(self) -> float:
        """Uniform float in ``[0, 1)`` with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates, walking from the last index down to 1."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: Sequence[T]) -> T:
        return items[self.below(len(items))]


def derive_seed(seed: int, index: int) -> int:
    """First SplitMix64 output for state ``seed XOR index``."""
    return Rng((seed ^ index) & MASK64).next_u64()


def shuffled(items: Sequence[T], seed: int) -> list[T]:
    out = list(items)
    Rng(seed).shuffle(out)
    return out
