"""Counter-based random bits keyed by (seed, sample index).

The generator is SplitMix64 used in its counter form: word ``i`` of the
stream for ``seed`` is ``mix64(key + (i + 1) * GAMMA)`` with
``key = mix64(seed)``.  Any word can be produced without touching the
others, so sample ``s`` of a run owns words ``[s * W, (s + 1) * W)`` and
workers may process sample ranges in any order and any split.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit, uint64

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64_py(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int) -> int:
    return mix64_py(seed & MASK64)


def word_py(key: int, counter: int) -> int:
    """Reference (pure Python) value of word ``counter`` for ``key``."""
    return mix64_py(key + (counter + 1) * GAMMA)


@njit(uint64(uint64), cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(uint64(uint64, uint64), cache=True, nogil=True)
def word(key, counter):
    return mix64(key + (counter + uint64(1)) * uint64(GAMMA))


@njit(cache=True, nogil=True)
def fill_bits(key, sample, n_bits, out):
    """Write ``n_bits`` random 0/1 bytes for ``sample`` into ``out``."""
    n_words = (n_bits + 63) // 64
    base = uint64(sample) * uint64(n_words)
    for w in range(n_words):
        x = word(key, base + uint64(w))
        lo = w * 64
        hi = min(lo + 64, n_bits)
        for i in range(lo, hi):
            out[i] = np.uint8((x >> uint64(i - lo)) & uint64(1))


class RngState(NamedTuple):
    """Position in a counter-based stream: the run seed and the sample index."""

    seed: int
    index: int = 0

    def key(self) -> np.uint64:
        return np.uint64(stream_key(self.seed))


def words_per_sample(n_bits: int) -> int:
    return (n_bits + 63) // 64


def random_bits(state: RngState, n_bits: int) -> np.ndarray:
    out = np.empty(n_bits, dtype=np.uint8)
    fill_bits(state.key(), np.uint64(state.index), n_bits, out)
    return out


def derive_seed(seed: int, *tags: int) -> int:
    """Independent sub-seed for a tagged sub-experiment."""
    z = seed & MASK64
    for t in tags:
        z = mix64_py(z ^ mix64_py((t + 1) * GAMMA))
    return z
