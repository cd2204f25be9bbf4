"""Stable seed derivation.

Every random stream is keyed by the tuple of things it belongs to, so
trials can run in any order (or in parallel) and still reproduce.
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *keys) -> int:
    """64-bit seed from ``master_seed`` and an arbitrary key path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed) & 0xFFFFFFFFFFFFFFFF).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def make_rng(master_seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))
