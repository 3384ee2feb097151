"""Seeding utilities shared by every randomized routine in the package.

All randomness flows through counter-based Philox generators so that runs are
reproducible from a single integer seed and independent work items (scenario
cells, chunks) can derive non-overlapping streams in any order.
"""

from __future__ import annotations

import zlib

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-wide generator (Philox) for an integer seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _as_entropy(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    # Strings and floats hash via CRC32 of their repr, which is stable across
    # platforms (repr of a float is its shortest round-trip form).
    return zlib.crc32(repr(part).encode("utf-8"))


def derive_seed(*parts) -> int:
    """Deterministically fold labels and numbers into a single integer seed.

    Used to give every scenario cell its own stream so results do not depend
    on execution order or worker count.
    """
    entropy = [_as_entropy(p) for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
