"""Counter-based pseudo-random primitives.

Every random quantity in this package is a pure function of a small tuple of
64-bit words (master seed, stream id, counter, ...).  That makes sampling
replayable, order-independent, and safe to evaluate in parallel: there is no
generator state to advance, only keys to hash.

The hash is a chained splitmix64 finalizer.  It is not cryptographic, but its
avalanche behaviour is far beyond what the statistical tests here can resolve.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_U64 = np.uint64
_INV_2_53 = 1.0 / float(1 << 53)


def _mix(x):
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    x = (x ^ (x >> _U64(30))) * _MIX1
    x = (x ^ (x >> _U64(27))) * _MIX2
    return x ^ (x >> _U64(31))


def hash_words(*words) -> int:
    """Hash a tuple of ints (or uint64 arrays) into uint64.

    Words are absorbed sequentially; arrays broadcast against each other, so
    ``hash_words(seed, np.arange(n), 0)`` yields n independent values.
    """
    with np.errstate(over="ignore"):
        h = _mix(_U64(0x6A09E667F3BCC909))
        for i, w in enumerate(words):
            if isinstance(w, np.ndarray):
                w = w.astype(np.uint64, copy=False)
            else:
                w = _U64(int(w) & 0xFFFFFFFFFFFFFFFF)
            h = _mix(h + _GAMMA * _U64(i + 1) + w)
    return h


def spawn_seed(master_seed: int, *stream: int) -> int:
    """Derive a child seed, e.g. per-trial seeds from a master seed."""
    return int(hash_words(master_seed, *stream))


def uniform01(*words) -> np.ndarray | float:
    """Uniform double in [0, 1) keyed by the given words (53-bit resolution)."""
    h = hash_words(*words)
    return np.asarray(h >> _U64(11), dtype=np.float64) * _INV_2_53


# pure-python twin of the hash for scalar hot loops; bit-identical outputs
_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA_I = 0x9E3779B97F4A7C15
_MIX1_I = 0xBF58476D1CE4E5B9
_MIX2_I = 0x94D049BB133111EB


def _mix_py(x: int) -> int:
    x = ((x ^ (x >> 30)) * _MIX1_I) & _MASK
    x = ((x ^ (x >> 27)) * _MIX2_I) & _MASK
    return x ^ (x >> 31)


def hash_words_py(*words: int) -> int:
    h = _mix_py(0x6A09E667F3BCC909)
    for i, w in enumerate(words):
        h = _mix_py((h + _GAMMA_I * (i + 1) + (w & _MASK)) & _MASK)
    return h


def uniform01_py(*words: int) -> float:
    return (hash_words_py(*words) >> 11) * _INV_2_53
