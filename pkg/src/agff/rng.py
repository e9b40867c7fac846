"""Seeded, platform-independent random generator.

Counter-based splitmix64: output i is mix64(seed + (i+1)*GOLDEN), so draws can
be produced one at a time or as vectorized numpy batches with identical
results. Same seed => same stream on every platform.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64_vec(v: np.ndarray) -> np.ndarray:
    z = v.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


class Rng:
    """Deterministic uniform source consumed strictly in draw order."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK
        self._count = 0

    def raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit draws as uint64."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        states = np.uint64(self._seed) + idx * np.uint64(_GOLDEN)
        return _mix64_vec(states)

    def next_u64(self) -> int:
        return int(self.raw(1)[0])

    def uniform(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Uniform doubles in [lo, hi), row-major draw order."""
        n = int(np.prod(shape)) if shape else 1
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        out = lo + u * (hi - lo)
        return out.reshape(shape)

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        items = list(range(n))
        if n < 2:
            return items
        draws = self.raw(n - 1)
        for j in range(n - 1, 0, -1):
            k = int(draws[n - 1 - j] % np.uint64(j + 1))
            items[j], items[k] = items[k], items[j]
        return items

    def shuffle(self, items: list) -> None:
        order = self.permutation(len(items))
        items[:] = [items[i] for i in order]
