"""Seeded stream derivation.

Every trial, chain and Fisher draw gets its own PCG64 stream keyed by
(master seed, path...). SeedSequence hashing makes the streams independent
and reproducible regardless of execution order.
"""
from __future__ import annotations

import numpy as np


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def stream(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), *map(int, path)])))


def derive_seed(master_seed: int, *path: int) -> int:
    """A 63-bit integer seed for the sub-stream at ``path``."""
    state = np.random.SeedSequence([int(master_seed), *map(int, path)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
