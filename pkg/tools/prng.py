# tools/prng.py
"""
Counter-based uniform samples from the splitmix64 finalizer.

Each node (i, j) gets its own draw computed from (seed, i, j) alone, so a field does not
depend on the platform, the numpy version or the order in which nodes are visited.
All arithmetic is on uint64 and wraps modulo 2^64.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# odd multipliers that spread the node indices before mixing
_ROW = np.uint64(0xD1B54A32D192ED03)
_COL = np.uint64(0xABA0D2D1A8F1B2CB)


def splitmix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 output function applied elementwise to a uint64 array."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def node_uniforms(seed: int, shape: tuple) -> np.ndarray:
    """Uniform draws strictly inside (0, 1), one per index of a 2D array of the given shape."""
    base = splitmix64(np.array([int(seed) & _MASK64], dtype=np.uint64))
    i = np.arange(shape[0], dtype=np.uint64)[:, None]
    j = np.arange(shape[1], dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        key = base ^ (i * _ROW) ^ (j * _COL)
    z = splitmix64(splitmix64(key))
    # top 52 bits, centred in their bin so 0 and 1 are never produced
    return ((z >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0 ** -52
