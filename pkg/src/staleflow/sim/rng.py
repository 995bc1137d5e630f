"""SplitMix64, the generator behind every synthetic scenario.

State transition and output (all arithmetic mod 2^64)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Derived quantities:

* ``below(n)``: draw ``x`` until ``x < 2^64 - (2^64 mod n)``, return ``x mod n``;
* ``random()``: ``(x >> 11) * 2^-53``;
* ``derive_seed(seed, k)``: first output of a generator seeded with
  ``seed ^ (k * 0xD1B54A32D192ED03 mod 2^64)``.

Ports that reproduce these rules reproduce scenarios bit for bit.
"""

from __future__ import annotations

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + self.below(hi - lo + 1)

    def random(self) -> float:
        return (self.next() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def chance(self, p: float) -> bool:
        return self.random() < p

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def weighted(self, weights) -> int:
        """Index drawn with probability proportional to ``weights``."""
        r = self.random() * sum(weights)
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                return i
        # float round-off: fall back to the last index that can be drawn
        return max(i for i, w in enumerate(weights) if w > 0)


def derive_seed(seed: int, k: int) -> int:
    return SplitMix64(seed ^ ((k * 0xD1B54A32D192ED03) & MASK)).next()
