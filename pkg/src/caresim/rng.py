"""Seeded, portable random number generator.

Every stochastic decision in the framework (human sampling, task
randomization, policy exploration, base-pose sampling) draws from a
SeededRng so that a (config, seed) pair fully determines a run.

The generator is xoshiro256++ seeded through splitmix64. Both are fixed,
published algorithms operating on 64-bit integers, so the stream is
identical on every platform and Python version. Doubles are produced from
the top 53 bits, giving uniform values in [0, 1).
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class SeededRng:
    """xoshiro256++ stream owned by a single consumer.

    Copy with `.spawn(key)` to derive an independent stream; never share
    one instance between actors that must stay reproducible independently.
    """

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        st = self.seed
        s = []
        for _ in range(4):
            st, v = _splitmix64(st)
            s.append(v)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & _MASK64, 23) + s[0]) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1), one draw from the stream."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform double in [lo, hi); advances the stream by one draw."""
        if lo > hi:
            raise ValueError(f"uniform: lo={lo} > hi={hi}")
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Integer in [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError("randint: n must be positive")
        # Smallest draws rejected so that the remainder divides evenly.
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            v = self.next_u64()
            if v <= limit:
                return v % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Gaussian via Box-Muller; consumes exactly two draws."""
        u1 = self.random()
        u2 = self.random()
        # Guard log(0); u1 is in [0,1) so nudge zero up.
        if u1 <= 0.0:
            u1 = 2.0 ** -53
        r = math.sqrt(-2.0 * math.log(u1))
        return mu + sigma * r * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self, key: int) -> "SeededRng":
        """Derive an independent stream keyed by (seed, key)."""
        mixed = self.seed
        _, mixed = _splitmix64((mixed ^ (key & _MASK64)) * 0x9E3779B97F4A7C15 & _MASK64)
        return SeededRng(mixed ^ (key & _MASK64))

    def getstate(self) -> tuple:
        return (self.seed, tuple(self._s))

    def setstate(self, state: tuple) -> None:
        self.seed = state[0]
        self._s = list(state[1])


def sample_uniform(rng: SeededRng, lo: float, hi: float) -> float:
    """Functional alias for rng.uniform, used by the human samplers."""
    return rng.uniform(lo, hi)
