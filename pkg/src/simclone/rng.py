"""Deterministic counter-based random streams.

Every randomized stage derives an independent Philox substream from a user
seed plus a small integer path, so work items (corpus pairs, forest trees)
can be computed in any order or in parallel and still reproduce bit-identical
output.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Return a Generator keyed by (seed, a, b).

    a and b must fit in 32 bits; they are packed into the second Philox key
    word so distinct paths never share a stream.
    """
    if not (0 <= a < 2**32 and 0 <= b < 2**32):
        raise ValueError("substream path components must fit in 32 bits")
    key = np.array([seed & _MASK64, ((a << 32) | b) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
