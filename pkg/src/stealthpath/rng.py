"""Deterministic seed derivation for reproducible, order-independent sampling.

Every stochastic operation in this package takes an explicit 64-bit seed.
Sub-streams are derived by hashing (seed, label, indices), so parallel or
reordered execution cannot change which random numbers a given operation sees.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, label: str, *indices: int) -> int:
    """Derive a 64-bit sub-stream seed from (seed, label, indices)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    h.update(b"/")
    h.update(str(label).encode())
    for i in indices:
        h.update(b"/")
        h.update(str(int(i)).encode())
    return int.from_bytes(h.digest(), "big")


def generator(seed: int, label: str = "root", *indices: int) -> np.random.Generator:
    """Counter-based generator keyed by the derived sub-stream seed."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, label, *indices)))
