"""Random rotations: randomized Walsh-Hadamard and Haar-uniform matrices.

All transforms act on the last axis, so a 2-D array is treated as a stack of
independent vectors. Hadamard rotations need a power-of-two length; ``pad``
appends zeros to get there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from drive import rng

MAX_HAAR_DIM = 16384


class Family(enum.IntEnum):
    HADAMARD = 0
    UNIFORM = 1


@dataclass(frozen=True)
class RotationSpec:
    """Everything sender and receiver need to build the same rotation."""

    family: Family
    seed: int
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.dim < 1:
            raise ValueError("rotation dimension must be positive")
        if self.family is Family.HADAMARD and not is_power_of_two(self.dim):
            raise ValueError(f"Hadamard rotation needs a power-of-two dimension, got {self.dim}")


@dataclass
class PaddedVector:
    data: np.ndarray
    original_len: int

    @property
    def padded_len(self) -> int:
        return self.data.shape[-1]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise ValueError("length must be positive")
    return 1 << (n - 1).bit_length()


def rotation_dim(d: int, family: Family) -> int:
    """Dimension the rotation acts in: padded for Hadamard, ``d`` for Haar."""
    return next_power_of_two(d) if Family(family) is Family.HADAMARD else d


def pad(x, length: int | None = None) -> PaddedVector:
    """Zero-pad the last axis to the next power of two (or to ``length``)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("cannot pad an empty vector")
    d = x.shape[-1]
    target = next_power_of_two(d) if length is None else length
    if target < d:
        raise ValueError(f"pad length {target} is shorter than the vector ({d})")
    out = np.zeros(x.shape[:-1] + (target,))
    out[..., :d] = x
    return PaddedVector(out, d)


@numba.njit(cache=True, nogil=True)
def _fwht_rows(m):
    rows, n = m.shape
    norm = 1.0 / math.sqrt(n)
    for r in range(rows):
        v = m[r]
        h = 1
        while h < n:
            for i in range(0, n, 2 * h):
                for j in range(i, i + h):
                    a = v[j]
                    b = v[j + h]
                    v[j] = a + b
                    v[j + h] = a - b
            h *= 2
        for j in range(n):
            v[j] *= norm


def fwht_in_place(v):
    """Normalized Walsh-Hadamard transform ``H v / sqrt(D)`` along the last axis.

    Mutates ``v`` (a float64 C-contiguous array or a :class:`PaddedVector`) and
    returns it. The normalized transform is its own inverse.
    """
    arr = v.data if isinstance(v, PaddedVector) else v
    if not isinstance(arr, np.ndarray) or arr.dtype != np.float64 or not arr.flags.c_contiguous:
        raise TypeError("fwht_in_place needs a C-contiguous float64 array")
    n = arr.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"length {n} is not a power of two")
    _fwht_rows(arr.reshape(-1, n))
    return v


def fwht(x) -> np.ndarray:
    """Out-of-place variant of :func:`fwht_in_place`."""
    return fwht_in_place(np.array(x, dtype=np.float64, order="C"))


def rademacher(seeds, dim: int) -> np.ndarray:
    """Random +-1 diagonals, one row per seed. Bit 0 maps to +1."""
    b = rng.bits(seeds, dim, rng.TAG_RADEMACHER)
    return 1.0 - 2.0 * b


def _check_hadamard(arr: np.ndarray, spec: RotationSpec) -> None:
    if spec.family is not Family.HADAMARD:
        raise ValueError("rotation spec is not a Hadamard rotation")
    if arr.shape[-1] != spec.dim:
        raise ValueError(f"vector length {arr.shape[-1]} does not match rotation dim {spec.dim}")


def _data(v) -> np.ndarray:
    return v.data if isinstance(v, PaddedVector) else np.asarray(v, dtype=np.float64)


def randomized_hadamard(v, spec: RotationSpec) -> np.ndarray:
    """``H (D v) / sqrt(dim)`` with the Rademacher diagonal ``D`` drawn from ``spec.seed``."""
    arr = _data(v)
    _check_hadamard(arr, spec)
    out = arr * rademacher(spec.seed, spec.dim)[0]
    return fwht_in_place(np.ascontiguousarray(out))


def randomized_hadamard_inverse(v, spec: RotationSpec) -> np.ndarray:
    """Transpose of :func:`randomized_hadamard`: ``D H v / sqrt(dim)``."""
    arr = _data(v)
    _check_hadamard(arr, spec)
    out = fwht_in_place(np.array(arr, dtype=np.float64, order="C"))
    out *= rademacher(spec.seed, spec.dim)[0]
    return out


@numba.njit(cache=True, nogil=True)
def _apply_reflectors(h, tau, which, x, transpose):
    """Apply ``Q`` (or ``Q^T``) from compact QR reflectors to each row of ``x`` in place.

    Reflector ``i`` of matrix ``b`` is ``I - tau[b, i] v v^T`` with ``v[i] = 1``
    and ``v[j] = h[b, i, j]`` for ``j > i``; row ``r`` of ``x`` uses matrix ``which[r]``.
    """
    n = x.shape[1]
    for r in range(x.shape[0]):
        b = which[r]
        v = x[r]
        for k in range(n):
            i = k if transpose else n - 1 - k
            t = tau[b, i]
            if t == 0.0:
                continue
            hi = h[b, i]
            dot = v[i]
            for j in range(i + 1, n):
                dot += hi[j] * v[j]
            dot *= t
            v[i] -= dot
            for j in range(i + 1, n):
                v[j] -= dot * hi[j]


@numba.njit(cache=True, nogil=True)
def _reflectors_from_normals(z, h, tau, signs):
    """Householder reflectors of a Haar matrix from ``n(n+1)/2`` normals per row.

    Step ``k`` turns the next ``n - k`` normals into the reflector that maps
    them onto ``beta e_k``, with the same conventions as LAPACK's ``dlarfg``.
    In Householder QR of a Gaussian matrix the column seen at step ``k`` is
    again i.i.d. Gaussian and independent of the earlier steps, so this gives
    exactly the reflectors and ``sign(R[k, k])`` of the sign-corrected QR
    construction without forming the matrix or factorizing it.
    """
    rows, n, _ = h.shape
    for r in range(rows):
        off = 0
        for k in range(n):
            m = n - k
            alpha = z[r, off]
            tail = 0.0
            for j in range(1, m):
                tail += z[r, off + j] * z[r, off + j]
            if tail == 0.0:
                beta = alpha
                tau[r, k] = 0.0
            else:
                beta = -math.copysign(math.sqrt(alpha * alpha + tail), alpha)
                tau[r, k] = (beta - alpha) / beta
                scale = 1.0 / (alpha - beta)
                for j in range(1, m):
                    h[r, k, k + j] = z[r, off + j] * scale
            signs[r, k] = -1.0 if beta < 0.0 else 1.0
            off += m


class _HaarFactors:
    """Compact form ``M = Q diag(s)`` of a stack of Haar matrices, one per seed."""

    def __init__(self, seeds: np.ndarray, dim: int):
        if dim > MAX_HAAR_DIM:
            raise ValueError(f"Haar rotation dim {dim} exceeds the {MAX_HAAR_DIM} guard")
        z = rng.normals(seeds, dim * (dim + 1) // 2, rng.TAG_HAAR)
        self.h = np.zeros((z.shape[0], dim, dim))
        self.tau = np.empty((z.shape[0], dim))
        self.signs = np.empty((z.shape[0], dim))
        _reflectors_from_normals(z, self.h, self.tau, self.signs)
        self.dim = dim

    def forward(self, x: np.ndarray, which: np.ndarray) -> np.ndarray:
        out = np.ascontiguousarray(x * self.signs[which])
        _apply_reflectors(self.h, self.tau, which, out, False)
        return out

    def inverse(self, y: np.ndarray, which: np.ndarray) -> np.ndarray:
        out = np.array(y, dtype=np.float64, order="C")
        _apply_reflectors(self.h, self.tau, which, out, True)
        out *= self.signs[which]
        return out

    def matrix(self, b: int, block: int = 64) -> np.ndarray:
        """Explicit ``M = Q diag(s)`` for stack entry ``b``.

        Reflectors are applied to the identity a block at a time in compact
        WY form ``I - V T V^T``, so the work is matrix products.
        """
        n = self.dim
        h, tau = self.h[b], self.tau[b]
        q = np.eye(n)
        for j0 in reversed(range(0, n, block)):
            j1 = min(n, j0 + block)
            v = np.triu(h[j0:j1, j0:], 1).T  # rows j0.., one reflector per column
            v[np.arange(j1 - j0), np.arange(j1 - j0)] = 1.0
            t = np.zeros((j1 - j0, j1 - j0))
            for i in range(j1 - j0):
                t[i, i] = tau[j0 + i]
                if i:
                    t[:i, i] = -tau[j0 + i] * (t[:i, :i] @ (v[:, :i].T @ v[:, i]))
            sub = q[j0:, :]
            sub -= v @ (t @ (v.T @ sub))
        return q * self.signs[b]


def sample_haar(spec: RotationSpec) -> np.ndarray:
    """Haar-distributed orthogonal matrix for ``spec.seed``.

    Equal in law to QR of a Gaussian matrix with column ``j`` of Q multiplied
    by the sign of ``R[j, j]`` (zero counts as positive); built from the
    Householder reflectors directly, so it costs O(dim^2) normals and no
    factorization.
    """
    if spec.family is not Family.UNIFORM:
        raise ValueError("rotation spec is not a uniform rotation")
    return _HaarFactors(np.array([spec.seed], dtype=np.uint64), spec.dim).matrix(0)


def apply_haar(m: np.ndarray, v) -> np.ndarray:
    """``m v`` for each vector on the last axis of ``v``."""
    v = _data(v)
    if m.shape[-1] != v.shape[-1]:
        raise ValueError(f"matrix dim {m.shape[-1]} does not match vector length {v.shape[-1]}")
    return v @ m.T


def apply_haar_inverse(m: np.ndarray, v) -> np.ndarray:
    v = _data(v)
    if m.shape[0] != v.shape[-1]:
        raise ValueError(f"matrix dim {m.shape[0]} does not match vector length {v.shape[-1]}")
    return v @ m


def rotate(x, spec: RotationSpec) -> np.ndarray:
    """Rotate one vector; bitwise equal to the matching :class:`BatchRotation` row."""
    x = _data(x)
    return BatchRotation(spec.family, [spec.seed], spec.dim).forward(x[None, :])[0]


def unrotate(y, spec: RotationSpec) -> np.ndarray:
    y = _data(y)
    return BatchRotation(spec.family, [spec.seed], spec.dim).inverse(y[None, :])[0]


class BatchRotation:
    """One rotation per row of a ``(B, dim)`` array.

    Row ``r`` uses ``RotationSpec(family, seeds[r], dim)`` and produces the
    same bits as the single-vector functions. Haar rotations are kept as QR
    reflectors and never formed explicitly.
    """

    def __init__(self, family: Family, seeds, dim: int):
        self.family = Family(family)
        self.seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
        self.dim = dim
        if self.family is Family.HADAMARD:
            if not is_power_of_two(dim):
                raise ValueError(f"Hadamard rotation needs a power-of-two dimension, got {dim}")
            self._diag = rademacher(self.seeds, dim)
            self._haar = None
        else:
            self._diag = None
            self._haar = _HaarFactors(self.seeds, dim)
            self._which = np.arange(len(self.seeds), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.seeds)

    def spec(self, row: int) -> RotationSpec:
        return RotationSpec(self.family, int(self.seeds[row]), self.dim)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (len(self), self.dim):
            raise ValueError(f"expected shape {(len(self), self.dim)}, got {x.shape}")
        if self._haar is None:
            return fwht_in_place(np.ascontiguousarray(x * self._diag))
        return self._haar.forward(x, self._which)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (len(self), self.dim):
            raise ValueError(f"expected shape {(len(self), self.dim)}, got {y.shape}")
        if self._haar is None:
            out = fwht_in_place(np.array(y, dtype=np.float64, order="C"))
            out *= self._diag
            return out
        return self._haar.inverse(y, self._which)
