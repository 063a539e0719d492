"""Random number source plumbing for the selectors.

Selectors take any object with the small subset of the ``random.Random``
API they use (``getrandbits``, ``randrange``, ``randint``, ``shuffle``).
``make_rng(None)`` returns the OS CSPRNG (production default);
``make_rng(seed)`` returns a deterministic generator for reproducible
analysis. ``ScriptedRng`` is a test double that replays a fixed list of
values.
"""
from __future__ import annotations

import hashlib
import random
from typing import Optional, Sequence


def derive_seed(root: int, *path: object) -> int:
    """Derive an independent 64-bit stream seed from a root seed and a path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((root,) + path).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: Optional[int]) -> random.Random:
    """Seeded deterministic generator, or the OS CSPRNG when seed is None."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)


class ScriptedRng:
    """Replays a scripted sequence of values; raises when exhausted.

    ``shuffle`` is a no-op so scripted selectors start from the identity
    permutation.
    """

    def __init__(self, values: Sequence[int]):
        self._values = list(values)
        self._pos = 0

    def _next(self) -> int:
        if self._pos >= len(self._values):
            raise RuntimeError("scripted RNG exhausted")
        v = self._values[self._pos]
        self._pos += 1
        return v

    def getrandbits(self, bits: int) -> int:
        return self._next()

    def randrange(self, n: int) -> int:
        return self._next()

    def randint(self, a: int, b: int) -> int:
        return self._next()

    def shuffle(self, seq: list) -> None:
        pass
