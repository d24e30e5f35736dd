"""Seeded randomness helpers.

Every stream is keyed by integers such as ``(seed, stage, user, purpose)`` and
never by policy, so paired simulation runs see identical draws.
"""
from __future__ import annotations

import numpy as np

# purpose keys
TRACE = 1
FADING = 2
SHADOWING = 3
QOS_SAMPLE = 4
TOLERANCE_NOISE = 5
SPLIT = 6

# stage keys
DEVELOPMENT = 10
PRODUCTION = 20

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def derive_seed(seed: int, *keys: int) -> int:
    """Collapse a key path into a fresh 63-bit integer seed."""
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _key_hash(*keys) -> np.ndarray:
    h = np.zeros(np.broadcast(*[np.asarray(k) for k in keys]).shape, dtype=np.uint64)
    for k in keys:
        k = np.asarray(k).astype(np.int64).astype(np.uint64)
        with np.errstate(over="ignore"):
            h = _splitmix64(h ^ k)
    return h


def hashed_normal(*keys) -> np.ndarray:
    """Counter-based standard normal draws; broadcasts over array-valued keys.

    The value for a given key tuple is independent of how many other keys are
    evaluated alongside it, which lets scalar and batched code paths agree.
    """
    a = _key_hash(*keys, 1)
    b = _key_hash(*keys, 2)
    scale = 1.0 / float(1 << 53)
    u1 = ((a >> np.uint64(11)).astype(np.float64) + 0.5) * scale
    u2 = ((b >> np.uint64(11)).astype(np.float64) + 0.5) * scale
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
