"""Named random streams derived from one root seed.

Every source of randomness (data generation, parameter init, frame sampling,
batching, augmentation) pulls from its own named stream so that ablations can
vary exactly one factor while all other draws stay fixed.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, *names) -> np.random.Generator:
    """Generator for the stream identified by ``names`` under ``seed``.

    Names are hashed with crc32 (stable across processes, unlike ``hash``).
    Integer name parts are used directly, so per-index streams stay cheap.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for name in names:
        if isinstance(name, (int, np.integer)):
            entropy.append(int(name) & 0xFFFFFFFF)
        else:
            entropy.append(zlib.crc32(str(name).encode("utf-8")))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
