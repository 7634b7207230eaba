"""Seeding discipline: one user-visible seed fans out to named substreams.

Every source of randomness in the package is a `numpy.random.Generator`
derived here, so a single integer seed fully determines program behaviour.
Substreams are keyed by name (train/mask/generate/corrupt/...) and, where
work is per-row, each row gets its own decorrelated child stream so results
do not depend on batching or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def sequence(seed: int, name: str) -> np.random.SeedSequence:
    """SeedSequence for the named substream of `seed`."""
    return np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=(zlib.crc32(name.encode()),))


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for the named substream of `seed`."""
    return np.random.default_rng(sequence(seed, name))


def spawn_streams(seed: int, name: str, n: int) -> list[np.random.Generator]:
    """`n` decorrelated generators (one per row) under the named substream."""
    return [np.random.default_rng(c) for c in sequence(seed, name).spawn(n)]
