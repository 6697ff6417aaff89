"""Counter-based random streams.

Every uniform draw is a pure function of ``(seed, index, step)``, computed by
chaining the SplitMix64 finalizer. No generator state is carried between
draws, so sequences can be extended in any order (or in parallel) and still
see exactly the same numbers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _MUL1) & MASK64
    x = ((x ^ (x >> 27)) * _MUL2) & MASK64
    return x ^ (x >> 31)


def _splitmix64_array(x: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64, matching the masked int path.
    x = x + np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MUL1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MUL2)
    return x ^ (x >> np.uint64(31))


def uniform(seed: int, index: int, step: int) -> float:
    """One uniform draw in [0, 1) for stream ``(seed, index)`` at ``step``."""
    k = splitmix64(seed & MASK64)
    k = splitmix64(k ^ (index & MASK64))
    k = splitmix64(k ^ (step & MASK64))
    return (k >> 11) * _INV_2_53


def uniform_batch(seed: int, indices, steps) -> np.ndarray:
    """Vectorized :func:`uniform`; bit-identical to the scalar version."""
    idx = np.asarray(indices, dtype=np.uint64)
    stp = np.broadcast_to(np.asarray(steps, dtype=np.uint64), idx.shape)
    k = np.full(idx.shape, splitmix64(seed & MASK64), dtype=np.uint64)
    k = _splitmix64_array(k ^ idx)
    k = _splitmix64_array(k ^ stp)
    return (k >> np.uint64(11)).astype(np.float64) * _INV_2_53


@dataclass(frozen=True)
class StreamKey:
    """Address of a single draw: run seed, sequence index, generation step."""

    seed: int
    index: int
    step: int

    def uniform(self) -> float:
        return uniform(self.seed, self.index, self.step)


def derive_seed(run_seed: int, label: str) -> int:
    """Per-item seed from a run seed and a stable string label (e.g. a prompt id)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return splitmix64((run_seed & MASK64) ^ int.from_bytes(digest, "little"))
