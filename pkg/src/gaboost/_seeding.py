"""Seed derivation shared by every stochastic component.

All randomness flows from one integer seed. Sub-streams are obtained by hashing
the seed together with string/int labels, so adding a new consumer never shifts
the stream of an existing one.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *labels: object) -> int:
    """Return a 63-bit seed derived from ``seed`` and an ordered tuple of labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little") >> 1


def derive_rng(seed: int, *labels: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))
