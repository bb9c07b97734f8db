"""DRIVE and DRIVE+ one-bit encoders.

DRIVE sends ``(S, sign(R x))`` and the receiver rebuilds ``R^T (S * sign)``.
DRIVE+ replaces the symmetric levels ``-S, +S`` by the two optimal 1-D
centroids of ``R x`` (optionally rescaled) and sends one bit per coordinate
saying which centroid is nearer.

The ``*_batch`` helpers work on ``(B, D)`` arrays of already rotated rows and
are shared by the single-vector API and the simulators, so both paths give
bitwise identical results.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from drive import analytics
from drive.kmeans1d import two_means_batch
from drive.transforms import BatchRotation, Family, RotationSpec, rotation_dim


class Algorithm(enum.IntEnum):
    DRIVE = 0
    DRIVE_PLUS = 1
    HADAMARD_SQ = 2
    TERNGRAD = 3


class ScalePolicy(enum.Enum):
    MIN_SSE = "min"
    UNBIASED = "unbiased"
    CONSTANT_EXPECTATION = "const"
    ERROR_FEEDBACK = "ef"


class ZeroVectorError(ValueError):
    """The zero vector has no direction; send it with the codec's zero flag."""


def constant_expectation_factor(dim: int) -> float:
    """``(dim - 1) B(1/2, (dim-1)/2) / (2 dim)``, i.e. ``1 / E||T||_1`` on the unit sphere."""
    if dim < 2:
        raise ValueError("constant-expectation scale needs dim >= 2")
    return 1.0 / analytics.expected_l1_on_sphere(dim)


def check_policy(algorithm: Algorithm, family: Family, policy: ScalePolicy) -> None:
    algorithm, family, policy = Algorithm(algorithm), Family(family), ScalePolicy(policy)
    if algorithm is Algorithm.DRIVE_PLUS and policy not in (ScalePolicy.MIN_SSE, ScalePolicy.UNBIASED):
        raise ValueError(f"DRIVE+ supports only min and unbiased scales, not {policy.value}")
    if policy is ScalePolicy.CONSTANT_EXPECTATION and family is not Family.UNIFORM:
        raise ValueError("constant-expectation scale requires a uniform rotation")


def drive_scales(rotated: np.ndarray, sq_norms: np.ndarray, policy: ScalePolicy) -> np.ndarray:
    """Scale S for each rotated row; ``sq_norms`` are the squared L2 norms of the inputs."""
    policy = ScalePolicy(policy)
    dim = rotated.shape[1]
    l1 = np.abs(rotated).sum(axis=1)
    if policy is ScalePolicy.MIN_SSE:
        return l1 / dim
    if policy is ScalePolicy.UNBIASED:
        return sq_norms / l1
    if policy is ScalePolicy.CONSTANT_EXPECTATION:
        return np.sqrt(sq_norms) * constant_expectation_factor(dim)
    return np.minimum(2.0 * l1 / dim, sq_norms / l1)


def drive_quantize_batch(rotated: np.ndarray, sq_norms: np.ndarray, policy: ScalePolicy):
    """Returns ``(scales, bits)``; bit is True where the rotated coordinate is >= 0."""
    return drive_scales(rotated, sq_norms, policy), rotated >= 0


def drive_plus_quantize_batch(rotated: np.ndarray, sq_norms: np.ndarray, policy: ScalePolicy):
    """Returns ``(lo, hi, bits)`` with the centroids already multiplied by the scale."""
    policy = ScalePolicy(policy)
    c0, c1, bits, _ = two_means_batch(rotated)
    if policy is ScalePolicy.MIN_SSE:
        factor = np.ones_like(c0)
    elif policy is ScalePolicy.UNBIASED:
        n1 = bits.sum(axis=1)
        csq = (rotated.shape[1] - n1) * c0 * c0 + n1 * c1 * c1
        factor = sq_norms / csq
    else:
        raise ValueError(f"DRIVE+ supports only min and unbiased scales, not {policy.value}")
    return factor * c0, factor * c1, bits


def two_level_values(lo: np.ndarray, hi: np.ndarray, bits: np.ndarray) -> np.ndarray:
    lo = np.asarray(lo, dtype=np.float64).reshape(-1, 1)
    hi = np.asarray(hi, dtype=np.float64).reshape(-1, 1)
    return np.where(bits, hi, lo)


@dataclass(eq=False)
class EncodedVector:
    """One DRIVE / DRIVE+ message.

    For DRIVE, ``scale0`` is S and ``scale1`` is None; the reconstruction
    levels are ``-S`` (bit 0) and ``+S`` (bit 1). For DRIVE+, ``scale0`` and
    ``scale1`` are the scaled centroids for bit 0 and bit 1.
    """

    algorithm: Algorithm
    rotation: RotationSpec
    scale0: float
    scale1: float | None
    bits: np.ndarray
    original_len: int

    def levels(self) -> tuple[float, float]:
        if self.algorithm is Algorithm.DRIVE:
            return -self.scale0, self.scale0
        return self.scale0, self.scale1

    def __eq__(self, other):
        if not isinstance(other, EncodedVector):
            return NotImplemented
        return (
            self.algorithm == other.algorithm
            and self.rotation == other.rotation
            and _same_float(self.scale0, other.scale0)
            and _same_float(self.scale1, other.scale1)
            and self.original_len == other.original_len
            and np.array_equal(self.bits, other.bits)
        )


def _same_float(a, b) -> bool:
    if a is None or b is None:
        return a is b
    return np.float64(a).tobytes() == np.float64(b).tobytes()


def _prepare(x, rotation: RotationSpec) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot encode an empty vector")
    if rotation.dim < x.size:
        raise ValueError(f"rotation dim {rotation.dim} is smaller than the vector ({x.size})")
    if rotation.family is Family.HADAMARD and rotation.dim != rotation_dim(x.size, Family.HADAMARD):
        raise ValueError(f"Hadamard rotation for length {x.size} must have dim {rotation_dim(x.size, Family.HADAMARD)}")
    sq = float(np.einsum("ij,ij->i", x[None, :], x[None, :])[0])
    if sq == 0.0:
        raise ZeroVectorError("cannot encode the zero vector")
    padded = np.zeros(rotation.dim)
    padded[: x.size] = x
    return padded, sq


def drive_encode(x, rotation: RotationSpec, policy: ScalePolicy = ScalePolicy.UNBIASED) -> EncodedVector:
    check_policy(Algorithm.DRIVE, rotation.family, policy)
    padded, sq = _prepare(x, rotation)
    rot = BatchRotation(rotation.family, [rotation.seed], rotation.dim)
    scales, bits = drive_quantize_batch(rot.forward(padded[None, :]), np.array([sq]), policy)
    return EncodedVector(Algorithm.DRIVE, rotation, float(scales[0]), None, bits[0], len(np.ravel(x)))


def drive_plus_encode(x, rotation: RotationSpec, policy: ScalePolicy = ScalePolicy.UNBIASED) -> EncodedVector:
    check_policy(Algorithm.DRIVE_PLUS, rotation.family, policy)
    padded, sq = _prepare(x, rotation)
    rot = BatchRotation(rotation.family, [rotation.seed], rotation.dim)
    lo, hi, bits = drive_plus_quantize_batch(rot.forward(padded[None, :]), np.array([sq]), policy)
    return EncodedVector(Algorithm.DRIVE_PLUS, rotation, float(lo[0]), float(hi[0]), bits[0], len(np.ravel(x)))


def _decode_padded(msg: EncodedVector) -> np.ndarray:
    bits = np.asarray(msg.bits, dtype=bool).reshape(-1)
    if bits.size != msg.rotation.dim:
        raise ValueError(f"message has {bits.size} bits, rotation needs {msg.rotation.dim}")
    lo, hi = msg.levels()
    values = two_level_values(lo, hi, bits[None, :])
    return BatchRotation(msg.rotation.family, [msg.rotation.seed], msg.rotation.dim).inverse(values)[0]


def drive_decode(msg: EncodedVector) -> np.ndarray:
    if msg.algorithm is not Algorithm.DRIVE:
        raise ValueError("not a DRIVE message")
    return _decode_padded(msg)[: msg.original_len]


def drive_plus_decode(msg: EncodedVector) -> np.ndarray:
    if msg.algorithm is not Algorithm.DRIVE_PLUS:
        raise ValueError("not a DRIVE+ message")
    return _decode_padded(msg)[: msg.original_len]


def decode(msg: EncodedVector) -> np.ndarray:
    return drive_decode(msg) if msg.algorithm is Algorithm.DRIVE else drive_plus_decode(msg)


def sse_identity(x, msg: EncodedVector) -> tuple[float, float]:
    """Measured SSE in the rotated space and ``||x||^2 - 2 S ||Rx||_1 + D S^2``."""
    if msg.algorithm is not Algorithm.DRIVE:
        raise ValueError("the SSE identity is stated for DRIVE messages")
    padded, sq = _prepare(x, msg.rotation)
    xhat = _decode_padded(msg)
    diff = padded - xhat
    lhs = float(np.dot(diff, diff))
    rotated = BatchRotation(msg.rotation.family, [msg.rotation.seed], msg.rotation.dim).forward(padded[None, :])[0]
    l1 = float(np.abs(rotated).sum())
    s = msg.scale0
    rhs = sq - 2.0 * s * l1 + msg.rotation.dim * s * s
    return lhs, rhs


def sse_formula(sq_norm: float, l1: float, dim: int, scale: float) -> float:
    return sq_norm - 2.0 * scale * l1 + dim * scale * scale


def rotated_l1(x, rotation: RotationSpec) -> float:
    padded, _ = _prepare(x, rotation)
    rot = BatchRotation(rotation.family, [rotation.seed], rotation.dim)
    return float(np.abs(rot.forward(padded[None, :])).sum())

