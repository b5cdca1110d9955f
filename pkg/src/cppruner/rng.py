"""Deterministic, labeled random streams.

Every stochastic choice in the library draws from an :class:`RngStream`
identified by a 64-bit master seed and a purpose label (``init``, ``batch``,
``hutch``, ``free``, ``mask``, ``noise``, ...).  The stream seed is
SplitMix64(master ^ FNV-1a(label)), the generator is xoshiro256++ and
normals come from Box-Muller, so identical (seed, label) pairs reproduce
identical sequences on every platform.
"""

import numpy as np

from . import _kernels

_MASK = (1 << 64) - 1
_INV53 = 2.0 ** -53


def fnv1a64(label: str) -> int:
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def splitmix64(x: int):
    """One SplitMix64 step: returns (advanced state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


class RngStream:
    """xoshiro256++ stream derived from (master seed, label)."""

    def __init__(self, master_seed: int, label: str):
        self.master_seed = int(master_seed) & _MASK
        self.label = label
        x = self.master_seed ^ fnv1a64(label)
        state = np.empty(4, dtype=np.uint64)
        for i in range(4):
            x, out = splitmix64(x)
            state[i] = out
        self.state = state
        self._spare_normals = np.empty(0)

    def substream(self, sublabel: str) -> "RngStream":
        return RngStream(self.master_seed, f"{self.label}/{sublabel}")

    def u64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _kernels.xoshiro256pp_fill(self.state, out)
        return out

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1)."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * _INV53

    def normal(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller (pairwise, spare cached)."""
        if n <= self._spare_normals.shape[0]:
            out = self._spare_normals[:n]
            self._spare_normals = self._spare_normals[n:]
            return out
        need = n - self._spare_normals.shape[0]
        m = (need + 1) // 2
        raw = self.u64(2 * m)
        # u1 in (0, 1] keeps log finite; pairs interleaved so the sequence
        # does not depend on how draws are batched
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = (2.0 * np.pi) * u2
        pairs = np.empty(2 * m)
        pairs[0::2] = radius * np.cos(angle)
        pairs[1::2] = radius * np.sin(angle)
        out = np.concatenate([self._spare_normals, pairs[:need]])
        self._spare_normals = pairs[need:]
        return out

    def integers(self, n: int, upper: int) -> np.ndarray:
        """n integers uniform in [0, upper)."""
        return np.minimum((self.uniform(n) * upper).astype(np.int64), upper - 1)

    def shuffle_index(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting uniform keys."""
        return np.argsort(self.uniform(n), kind="stable")
