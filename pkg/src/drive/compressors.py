"""Batch encode/decode for every compressor, one seed per row.

Row ``r`` of a batch gives exactly the same message as the single-vector
encoder called with ``RotationSpec(family, seeds[r], D)`` (and, for the
stochastic baselines, rounding seed ``seeds[r]``). All-zero rows decode to
zero, mirroring the codec's zero-vector flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drive import baselines, rng
from drive.quantizers import (
    Algorithm,
    ScalePolicy,
    check_policy,
    drive_plus_quantize_batch,
    drive_quantize_batch,
    two_level_values,
)
from drive.transforms import BatchRotation, Family, rotation_dim


@dataclass(frozen=True)
class Scheme:
    algorithm: Algorithm
    rotation: Family | None = Family.HADAMARD
    policy: ScalePolicy | None = ScalePolicy.UNBIASED

    def __post_init__(self):
        alg = Algorithm(self.algorithm)
        object.__setattr__(self, "algorithm", alg)
        if alg is Algorithm.TERNGRAD:
            object.__setattr__(self, "rotation", None)
            object.__setattr__(self, "policy", None)
            return
        fam = Family(self.rotation) if self.rotation is not None else Family.HADAMARD
        object.__setattr__(self, "rotation", fam)
        if alg is Algorithm.HADAMARD_SQ:
            if fam is not Family.HADAMARD:
                raise ValueError("Hadamard + SQ needs a Hadamard rotation")
            object.__setattr__(self, "policy", None)
            return
        pol = ScalePolicy(self.policy if self.policy is not None else ScalePolicy.UNBIASED)
        object.__setattr__(self, "policy", pol)
        check_policy(alg, fam, pol)

    def dim(self, d: int) -> int:
        if self.rotation is None:
            return d
        return rotation_dim(d, self.rotation)

    def cost_per_row(self, d: int) -> int:
        """Rough memory footprint of one row, in float64 words."""
        n = self.dim(d)
        return n * n if self.rotation is Family.UNIFORM else 8 * n


@dataclass
class BatchPayload:
    scheme: Scheme
    original_len: int
    rotation: BatchRotation | None
    lo: np.ndarray | None
    hi: np.ndarray | None
    bits: np.ndarray
    signs: np.ndarray | None
    nonzero: np.ndarray


def encode_batch(x: np.ndarray, scheme: Scheme, seeds) -> BatchPayload:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("encode_batch needs a (B, d) array")
    b, d = x.shape
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    if seeds.size != b:
        raise ValueError("need one seed per row")
    sq = np.einsum("ij,ij->i", x, x)
    nonzero = sq > 0
    safe_sq = np.where(nonzero, sq, 1.0)
    alg = scheme.algorithm

    if alg is Algorithm.TERNGRAD:
        u = rng.uniforms(seeds, d, rng.TAG_ROUNDING)
        s, mags, signs = baselines.terngrad_encode_batch(x, u)
        return BatchPayload(scheme, d, None, s, None, mags, signs, nonzero)

    dim = scheme.dim(d)
    padded = np.zeros((b, dim))
    padded[:, :d] = x
    # zero rows go through a dummy unit vector so no NaNs appear; their output is masked.
    padded[~nonzero, 0] = 1.0
    rot = BatchRotation(scheme.rotation, seeds, dim)
    rotated = rot.forward(padded)
    if alg is Algorithm.DRIVE:
        s, bits = drive_quantize_batch(rotated, safe_sq, scheme.policy)
        lo, hi = -s, s
    elif alg is Algorithm.DRIVE_PLUS:
        lo, hi, bits = drive_plus_quantize_batch(rotated, safe_sq, scheme.policy)
    else:
        u = rng.uniforms(seeds, dim, rng.TAG_ROUNDING)
        lo, hi, bits = baselines.hadamard_sq_encode_batch(rotated, u)
    return BatchPayload(scheme, d, rot, lo, hi, bits, None, nonzero)


def decode_batch(p: BatchPayload) -> np.ndarray:
    if p.scheme.algorithm is Algorithm.TERNGRAD:
        out = baselines.terngrad_values(p.lo, p.bits, p.signs)
    else:
        out = p.rotation.inverse(two_level_values(p.lo, p.hi, p.bits))[:, : p.original_len]
    out[~p.nonzero] = 0.0
    return out


def roundtrip_batch(x: np.ndarray, scheme: Scheme, seeds) -> np.ndarray:
    return decode_batch(encode_batch(x, scheme, seeds))
