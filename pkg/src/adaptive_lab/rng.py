"""Counter-based, splittable random streams.

Every trajectory gets its own Philox stream keyed by a 64-bit seed derived
from (master_seed, *indices) with a splitmix64-style mixing hash, so
replications are order-independent and safe to generate in parallel.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    """One splitmix64 mixing step on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Derive a 64-bit stream seed from a master seed and index path."""
    x = splitmix64(master_seed & _MASK)
    for idx in indices:
        x = splitmix64(x ^ splitmix64((idx & _MASK) + 0xD1B54A32D192ED03))
    return x


def make_generator(seed: int) -> np.random.Generator:
    """Philox generator keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK))
