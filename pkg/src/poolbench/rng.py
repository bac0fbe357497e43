"""Deterministic seeding primitives.

Every shuffle and every derived seed in the splitting/fold machinery flows
through splitmix64 so that results are bit-identical across platforms and
library versions. Seed hierarchy: one master seed per run, per-dataset seed
derived from (master, dataset id), per-purpose seeds derived from
(dataset seed, purpose tag).
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """splitmix64 stream: state advances by the golden gamma, output is mixed."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def fnv1a64(text: str) -> int:
    """FNV-1a hash of the UTF-8 bytes, used to fold tags into seeds."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


def derive_seed(seed: int, tag: str) -> int:
    """Derive a child seed from a parent seed and a purpose tag.

    Never returns 0 so derived seeds can double as perturbation seeds
    (seed 0 means "no perturbation" for builtin learners).
    """
    child = _mix((seed ^ fnv1a64(tag)) & _MASK)
    return child if child != 0 else 1
