"""Comparison compressors with a one- or two-bit-per-coordinate budget.

* Hadamard + 1-bit stochastic quantization: rotate, then round every
  coordinate randomly to the row's min or max so the estimate is unbiased.
* TernGrad: clip at 2.5 standard deviations, then send a random magnitude bit
  (0 or the max |coordinate|) and a sign bit per coordinate.

The rounding randomness is private to the sender and never goes on the wire.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drive import rng
from drive.quantizers import Algorithm, ZeroVectorError, _same_float, two_level_values
from drive.transforms import BatchRotation, Family, RotationSpec, rotation_dim

TERNGRAD_CLIP = 2.5


@dataclass(eq=False)
class BaselineMessage:
    """``aux`` is ``(min, max)`` for HadamardSQ and ``(s,)`` for TernGrad."""

    algorithm: Algorithm
    rotation: RotationSpec | None
    aux: tuple[float, ...]
    bits: np.ndarray
    original_len: int
    sign_bits: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, BaselineMessage):
            return NotImplemented
        same_signs = (self.sign_bits is None and other.sign_bits is None) or (
            self.sign_bits is not None
            and other.sign_bits is not None
            and np.array_equal(self.sign_bits, other.sign_bits)
        )
        return (
            self.algorithm == other.algorithm
            and self.rotation == other.rotation
            and len(self.aux) == len(other.aux)
            and all(_same_float(a, b) for a, b in zip(self.aux, other.aux))
            and self.original_len == other.original_len
            and np.array_equal(self.bits, other.bits)
            and same_signs
        )


def stochastic_round_batch(values: np.ndarray, lo: np.ndarray, hi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Bit is True with probability ``(v - lo) / (hi - lo)``; degenerate rows give all False."""
    width = (hi - lo)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(width > 0, (values - lo[:, None]) / width, 0.0)
    return u < p


def hadamard_sq_encode_batch(rotated: np.ndarray, u: np.ndarray):
    lo = rotated.min(axis=1)
    hi = rotated.max(axis=1)
    return lo, hi, stochastic_round_batch(rotated, lo, hi, u)


def terngrad_encode_batch(x: np.ndarray, u: np.ndarray):
    """Returns ``(s, magnitude_bits, sign_bits)`` per row."""
    sigma = x.std(axis=1)
    limit = (TERNGRAD_CLIP * sigma)[:, None]
    clipped = np.clip(x, -limit, limit)
    s = np.abs(clipped).max(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(s[:, None] > 0, np.abs(clipped) / s[:, None], 0.0)
    return s, u < p, clipped >= 0


def terngrad_values(s: np.ndarray, mags: np.ndarray, signs: np.ndarray) -> np.ndarray:
    return np.where(signs, 1.0, -1.0) * s[:, None] * mags


def terngrad_clip(x) -> np.ndarray:
    """The clipped vector TernGrad is unbiased for."""
    x = np.asarray(x, dtype=np.float64)
    limit = TERNGRAD_CLIP * x.std()
    return np.clip(x, -limit, limit)


def _rounding_uniforms(seed: int, count: int) -> np.ndarray:
    return rng.uniforms([seed], count, rng.TAG_ROUNDING)


def hadamard_sq_encode(x, rotation: RotationSpec, seed: int) -> BaselineMessage:
    """``seed`` drives the sender's rounding only; the decoder never needs it."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if rotation.family is not Family.HADAMARD:
        raise ValueError("Hadamard + SQ needs a Hadamard rotation")
    if rotation.dim != rotation_dim(x.size, Family.HADAMARD):
        raise ValueError(f"rotation dim {rotation.dim} does not fit a length-{x.size} vector")
    if not np.any(x):
        raise ZeroVectorError("cannot encode the zero vector")
    padded = np.zeros((1, rotation.dim))
    padded[0, : x.size] = x
    rotated = BatchRotation(Family.HADAMARD, [rotation.seed], rotation.dim).forward(padded)
    lo, hi, bits = hadamard_sq_encode_batch(rotated, _rounding_uniforms(seed, rotation.dim))
    return BaselineMessage(Algorithm.HADAMARD_SQ, rotation, (float(lo[0]), float(hi[0])), bits[0], x.size)


def hadamard_sq_decode(msg: BaselineMessage) -> np.ndarray:
    if msg.algorithm is not Algorithm.HADAMARD_SQ:
        raise ValueError("not a Hadamard + SQ message")
    bits = np.asarray(msg.bits, dtype=bool).reshape(1, -1)
    if bits.shape[1] != msg.rotation.dim:
        raise ValueError(f"message has {bits.shape[1]} bits, rotation needs {msg.rotation.dim}")
    values = two_level_values(msg.aux[0], msg.aux[1], bits)
    out = BatchRotation(Family.HADAMARD, [msg.rotation.seed], msg.rotation.dim).inverse(values)
    return out[0, : msg.original_len]


def terngrad_encode(x, seed: int) -> BaselineMessage:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.any(x):
        raise ZeroVectorError("cannot encode the zero vector")
    s, mags, signs = terngrad_encode_batch(x[None, :], _rounding_uniforms(seed, x.size))
    return BaselineMessage(Algorithm.TERNGRAD, None, (float(s[0]),), mags[0], x.size, signs[0])


def terngrad_decode(msg: BaselineMessage) -> np.ndarray:
    if msg.algorithm is not Algorithm.TERNGRAD:
        raise ValueError("not a TernGrad message")
    mags = np.asarray(msg.bits, dtype=bool).reshape(1, -1)
    signs = np.asarray(msg.sign_bits, dtype=bool).reshape(1, -1)
    if mags.shape[1] != msg.original_len or signs.shape[1] != msg.original_len:
        raise ValueError("TernGrad bit planes must match the vector length")
    return terngrad_values(np.array([msg.aux[0]]), mags, signs)[0]
