"""Counter-based random streams.

Every random quantity is a pure function of a 64-bit key.  A master seed is
split into child streams by hashing the child index into the key, so results
do not depend on the order (or thread) in which replicates are evaluated.
Per-edge uniforms are keyed on ``(edge_key, min(id), max(id))``.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ._accel import njit

MASK64 = (1 << 64) - 1

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

_TAG_CHILD = 0x6A09E667F3BCC908
_TAG_EDGE = 0xBB67AE8584CAA73B
_TAG_POINTS = 0x3C6EF372FE94F82B
_TAG_FRESH = 0xA54FF53A5F1D36F1


def splitmix64(x: int) -> int:
    """Scalar splitmix64 on Python ints (used for key derivation)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@njit
def _mix(x):
    x = x + _GAMMA
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@njit
def pair_uniform_scalar(key, i, j):
    """Uniform in [0, 1) for the unordered id pair ``{i, j}`` under ``key``."""
    lo = np.uint64(min(i, j))
    hi = np.uint64(max(i, j))
    h = _mix(_mix(key ^ lo) + hi)
    return np.float64(h >> _S11) * _INV53


def _mix_array(x):
    x = x + _GAMMA
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def pair_uniform(key, i, j):
    """Vectorised twin of :func:`pair_uniform_scalar`; bit-identical output."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    lo = np.minimum(i, j).astype(np.uint64)
    hi = np.maximum(i, j).astype(np.uint64)
    k = np.uint64(key)
    with np.errstate(over="ignore"):
        h = _mix_array(_mix_array(k ^ lo) + hi)
    return (h >> _S11).astype(np.float64) * _INV53


def float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


@dataclass(frozen=True)
class Stream:
    """A node in the seed tree: ``Stream(seed).child(3).child(0)``."""

    key: int

    @classmethod
    def from_seed(cls, seed: int) -> "Stream":
        return cls(splitmix64(int(seed) & MASK64))

    def child(self, index: int) -> "Stream":
        return Stream(splitmix64(self.key ^ splitmix64((_TAG_CHILD + int(index)) & MASK64)))

    def children(self, n: int):
        return [self.child(i) for i in range(n)]

    @property
    def edge_key(self) -> int:
        return splitmix64(self.key ^ _TAG_EDGE)

    def fresh_edge_key(self, lam: float) -> int:
        """Edge key that also depends on the degree parameter (no coupling across lambda)."""
        return splitmix64(self.edge_key ^ splitmix64(float_bits(lam) ^ _TAG_FRESH))

    def generator(self) -> np.random.Generator:
        """numpy Generator on a Philox (counter-based) bit generator."""
        k = splitmix64(self.key ^ _TAG_POINTS)
        return np.random.Generator(np.random.Philox(key=k))


def as_stream(stream) -> Stream:
    if isinstance(stream, Stream):
        return stream
    return Stream.from_seed(int(stream))
