"""Deterministic, splittable randomness.

All samplers draw from a counter-based Philox generator keyed by an integer
seed.  Recursive callers derive child seeds from (parent seed, path label)
so that any subtree of work is reproducible in isolation and schedules can be
parallelized without coordination.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def child_seed(seed: int, *labels: object) -> int:
    """Stable 64-bit child seed from a parent seed and a path label."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(repr(label).encode())
    return int.from_bytes(h.digest(), "big") & _MASK64
