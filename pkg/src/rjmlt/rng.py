"""Seedable xoshiro256** streams usable from both Python and numba kernels.

Every random number in the package is drawn from a :class:`Stream`. A stream
is a four-word ``uint64`` state array; jitted code advances it in place with
:func:`next_double`, so a chain replays exactly from ``(seed, name)``.
"""
from __future__ import annotations

import zlib

import numpy as np
from numba import njit, uint64

_MASK53 = 2.0 ** -53


@njit(inline="always", cache=True)
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def next_u64(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@njit(cache=True)
def next_double(state):
    """Uniform double in [0, 1) with 53 random bits."""
    return float(next_u64(state) >> uint64(11)) * _MASK53


def seed_state(seed: int, name: str = "") -> np.ndarray:
    """Derive a xoshiro state for the named substream of ``seed``."""
    key = (zlib.crc32(name.encode("utf-8")),) if name else ()
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    state = ss.generate_state(4, dtype=np.uint64)
    if not state.any():
        state[0] = 1
    return state


class Stream:
    """A named, reproducible random stream.

    >>> a = Stream(7, "bootstrap"); b = Stream(7, "bootstrap")
    >>> a.uniform() == b.uniform()
    True
    """

    def __init__(self, seed: int = 0, name: str = ""):
        self.seed = int(seed)
        self.name = name
        self.state = seed_state(seed, name)

    def uniform(self) -> float:
        return next_double(self.state)

    def uniforms(self, n: int) -> np.ndarray:
        return _fill(self.state, int(n))

    def substream(self, name: str) -> "Stream":
        sub = f"{self.name}/{name}" if self.name else name
        return Stream(self.seed, sub)

    def copy(self) -> "Stream":
        other = Stream.__new__(Stream)
        other.seed = self.seed
        other.name = self.name
        other.state = self.state.copy()
        return other

    def __repr__(self):
        return f"Stream(seed={self.seed}, name={self.name!r})"


@njit(cache=True)
def _fill(state, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = next_double(state)
    return out


def as_stream(rng, name: str = "") -> Stream:
    """Accept a Stream, an int seed, or None."""
    if isinstance(rng, Stream):
        return rng
    if rng is None:
        return Stream(0, name)
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng), name)
    raise TypeError(f"expected Stream or int seed, got {type(rng).__name__}")
