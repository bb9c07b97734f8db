"""Counter-based random streams.

Every random quantity in the package is a pure function of ``(seed, index)``:
word ``i`` of the stream for ``seed`` is the SplitMix64 output at position
``i``, i.e. ``mix64(key + (i + 1) * GAMMA)`` with ``key = mix64(seed ^ tag)``.
Nothing is stateful, so many seeds can be expanded at once, and results never
depend on batching or thread layout.
"""

from __future__ import annotations

import math

import numba
import numpy as np

_MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0

# stream purposes; mixed into the seed so different consumers never share words
TAG_RADEMACHER = 0x52414445
TAG_HAAR = 0x48414152
TAG_SAMPLE = 0x53414D50
TAG_ROUNDING = 0x524F554E


def mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash an ordered tuple of non-negative ints into one 64-bit seed."""
    h = 0x6A09E667F3BCC908
    for p in parts:
        if p < 0:
            raise ValueError("seed parts must be non-negative")
        h = mix64_int(h ^ mix64_int(p + GAMMA))
    return h


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _words(keys, count, out):
    g = np.uint64(GAMMA)
    for r in range(keys.shape[0]):
        k = keys[r]
        for i in range(count):
            out[r, i] = _mix(k + np.uint64(i + 1) * g)


@numba.njit(cache=True, nogil=True)
def _uniforms(keys, count, out):
    g = np.uint64(GAMMA)
    for r in range(keys.shape[0]):
        k = keys[r]
        for i in range(count):
            out[r, i] = float(_mix(k + np.uint64(i + 1) * g) >> np.uint64(11)) * _INV53


@numba.njit(cache=True, nogil=True)
def _normals(keys, count, out):
    g = np.uint64(GAMMA)
    for r in range(keys.shape[0]):
        k = keys[r]
        for p in range((count + 1) // 2):
            u1 = float(_mix(k + np.uint64(2 * p + 1) * g) >> np.uint64(11)) * _INV53
            u2 = float(_mix(k + np.uint64(2 * p + 2) * g) >> np.uint64(11)) * _INV53
            rad = math.sqrt(-2.0 * math.log1p(-u1))
            theta = 2.0 * math.pi * u2
            out[r, 2 * p] = rad * math.cos(theta)
            if 2 * p + 1 < count:
                out[r, 2 * p + 1] = rad * math.sin(theta)


@numba.njit(cache=True)
def _mix_array(z, out):
    for i in range(z.shape[0]):
        out[i] = _mix(z[i])


def _keys(seeds, tag: int) -> np.ndarray:
    if isinstance(seeds, np.ndarray) and seeds.dtype == np.uint64:
        arr = seeds
    elif isinstance(seeds, np.ndarray) and seeds.dtype.kind in "iu":
        arr = seeds.astype(np.uint64)
    elif isinstance(seeds, np.ndarray) or np.ndim(seeds) == 0:
        arr = np.array([int(s) & _MASK for s in np.ravel(np.asarray(seeds, dtype=object))], dtype=np.uint64)
    else:
        # plain sequences go through Python ints so large seeds never pass through float64
        arr = np.array([int(s) & _MASK for s in seeds], dtype=np.uint64)
    arr = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty(arr.size, dtype=np.uint64)
    _mix_array(arr ^ np.uint64(tag), out)
    return out


def words(seeds, count: int, tag: int = 0) -> np.ndarray:
    """Raw 64-bit words, shape ``(len(seeds), count)``.

    Row ``r`` holds words ``0..count-1`` of the stream for ``seeds[r]``;
    a longer ``count`` only appends, it never changes earlier words.
    """
    keys = _keys(seeds, tag)
    out = np.empty((keys.size, count), dtype=np.uint64)
    _words(keys, count, out)
    return out


def uniforms(seeds, count: int, tag: int = 0) -> np.ndarray:
    """Doubles in [0, 1) carrying the top 53 bits of each word."""
    keys = _keys(seeds, tag)
    out = np.empty((keys.size, count))
    _uniforms(keys, count, out)
    return out


def bits(seeds, count: int, tag: int = 0) -> np.ndarray:
    """Random bits; bit ``i`` is bit ``i % 64`` (LSB first) of word ``i // 64``."""
    w = words(seeds, (count + 63) // 64, tag).astype("<u8")
    b = np.unpackbits(w.view(np.uint8), axis=1, bitorder="little")
    return b[:, :count].astype(bool)


def normals(seeds, count: int, tag: int = 0) -> np.ndarray:
    """Standard normals by Box-Muller on consecutive uniform pairs.

    Output ``2k`` is ``r cos(theta)`` and ``2k + 1`` is ``r sin(theta)`` with
    ``r = sqrt(-2 ln(1 - u[2k]))`` and ``theta = 2 pi u[2k + 1]``.
    """
    keys = _keys(seeds, tag)
    out = np.empty((keys.size, count))
    _normals(keys, count, out)
    return out
