"""Deterministic seed derivation.

Every random quantity in the package is drawn from a generator built here, so
an experiment is a pure function of its integer seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def derive_seed(seed: int, *keys) -> np.random.SeedSequence:
    """Child seed sequence for a named/numbered stream under ``seed``."""
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))


def generator(seed, *keys) -> np.random.Generator:
    """Return a generator; an existing Generator is passed through untouched."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("stream keys need an integer seed")
        return seed
    return np.random.default_rng(derive_seed(seed, *keys))


def child_int(seed: int, *keys) -> int:
    """A derived 63-bit integer seed, for recording in result files."""
    return int(derive_seed(seed, *keys).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
