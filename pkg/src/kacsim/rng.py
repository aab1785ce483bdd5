"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream_index)``; the draw
index is Philox's internal counter. Work is split into chunks whose stream
index is the chunk number, so results never depend on how chunks are
distributed over workers.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return stream(int(rng), 0)
