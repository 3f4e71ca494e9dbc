"""Seed plumbing: every random draw in the package flows from an explicit seed."""
from __future__ import annotations

import numpy as np


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence(list(seed))
    return np.random.SeedSequence(seed)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))


def derive(seed, *key: int) -> np.random.SeedSequence:
    """Child sequence addressed by ``key``; independent of sibling keys."""
    ss = seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**63))
