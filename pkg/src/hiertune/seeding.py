"""Deterministic seed derivation for independent RNG streams.

Every random stream in a run is keyed by (master seed, purpose tags), never
by scheduling order, so concurrent and sequential execution draw identical
values. Python's built-in hash() is salted per process and must not be used
here.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: int | str) -> int:
    """Map a tuple of tags to a stable 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def stream(*parts: int | str) -> random.Random:
    """A fresh RNG seeded from the given tags."""
    return random.Random(derive_seed(*parts))
