"""Deterministic counter-based random number generation.

Every stochastic element of training and sampling draws from an `Rng`, so a
run is a pure function of its seed. The generator is counter-based (splitmix64
applied to seed + index) rather than stateful-iterative: identical seeds give
identical streams on every platform, and draws can be vectorised without
changing the sequence.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # Finalizer of splitmix64; input and output are uint64 arrays.
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


class Rng:
    """Counter-based uniform/Gaussian generator.

    The i-th raw draw is ``splitmix64(seed + (i+1)*golden)``; the instance
    only remembers how many draws have been consumed.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self.counter = int(counter)

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _splitmix64(self.seed + idx * _GOLDEN)

    def uniform(self, shape=()) -> np.ndarray:
        """Uniform draws in [0, 1), float64, of the given shape."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)) * (2.0 ** -53)
        return u.reshape(shape) if shape else u[0]

    def normal(self, shape=()) -> np.ndarray:
        """Standard normal draws via the Box-Muller transform."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u1 = 1.0 - (self._raw(n) >> np.uint64(11)) * (2.0 ** -53)  # (0, 1]
        u2 = (self._raw(n) >> np.uint64(11)) * (2.0 ** -53)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape) if shape else z[0]

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Uniform integers in [low, high)."""
        if high <= low:
            raise ContractViolation(f"empty integer range [{low}, {high})")
        u = self.uniform(shape)
        return (low + np.floor(u * (high - low))).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random permutation of range(n)."""
        return np.argsort(self.uniform((n,)), kind="stable")

    def derive(self, tag: str) -> "Rng":
        """Independent stream keyed by (seed, tag); does not consume draws."""
        h = np.uint64(2166136261)
        with np.errstate(over="ignore"):
            for b in tag.encode():
                h = (h ^ np.uint64(b)) * np.uint64(16777619)
            mixed = _splitmix64(np.array([self.seed ^ h]))[0]
        return Rng(int(mixed))
