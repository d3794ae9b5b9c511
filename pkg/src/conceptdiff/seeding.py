"""Seed-stream derivation.

Every randomized operation draws from its own numbered substream of one
master seed, so adding a new randomized step never perturbs the streams
already in use (numbers are append-only).
"""

from __future__ import annotations

import numpy as np

BASELINE_SHUFFLE = 0
GOLD_FILL = 1
KFOLD_SHUFFLE = 2
CLASS_BALANCE = 3
GROUP_SAMPLE = 4


def spawn_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Generator for substream `stream` (repeat `index`) of master `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def derive_seed(seed: int, stream: int, index: int = 0) -> int:
    """Stable 63-bit integer seed for ops that take a seed rather than an rng."""
    ss = np.random.SeedSequence(seed, spawn_key=(stream, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
