"""Counter-based uniform streams, one per Monte Carlo path.

Draw ``c`` of path ``p`` under ``seed`` is a pure function of
``(seed, p, c)``: the SplitMix64 finaliser applied to a Weyl sequence whose
offset is itself a hash of ``(seed, p)``.  Paths can therefore be run in any
order, on any number of threads, with bit-identical results.
"""
import numpy as np
from numba import njit

__all__ = ["mix64", "path_key", "uniform", "uniforms"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0xD1B54A32D192ED03)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def path_key(seed, path):
    return mix64(mix64(np.uint64(seed) ^ _SEED_SALT) + np.uint64(path) * _GOLDEN)


@njit(cache=True, inline="always")
def uniform(key, counter):
    """Uniform on [0, 1) with 53 random bits."""
    z = mix64(key + (np.uint64(counter) + np.uint64(1)) * _GOLDEN)
    return float(z >> np.uint64(11)) * _INV53


@njit(cache=True)
def _fill(seed, path, n, out):
    key = path_key(seed, path)
    for c in range(n):
        out[c] = uniform(key, c)


def uniforms(seed: int, path: int, n: int) -> np.ndarray:
    """First ``n`` draws of the stream of ``path`` (for inspection and tests)."""
    out = np.empty(n)
    _fill(np.uint64(seed % 2**64), np.uint64(path), n, out)
    return out
