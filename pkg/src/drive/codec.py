"""Bit-exact wire format for compressed vectors (``.dwf`` frames).

Layout, all integers little-endian::

    0   magic      u8   0x44
    1   version    u8   0x01
    2   algorithm  u8   0 Drive, 1 DrivePlus, 2 HadamardSQ, 3 TernGrad
    3   rotation   u8   0 Hadamard, 1 Uniform, 255 none
    4   flags      u8   bit 0 = zero vector, other bits must be 0
    5   reserved   u16  must be 0
    7   length     u32  original (unpadded) vector length
    11  seed       u64  rotation seed (0 when there is no rotation)
    19  scales     1 or 2 x f64, count fixed by the algorithm
    ..  payload    bits packed LSB first, unused trailing bits 0

A zero-vector frame is the 19-byte header alone. TernGrad's payload is its
magnitude plane followed by its sign plane, ``2 d`` bits in total.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from drive.baselines import (
    BaselineMessage,
    hadamard_sq_decode,
    hadamard_sq_encode,
    terngrad_decode,
    terngrad_encode,
)
from drive.quantizers import (
    Algorithm,
    EncodedVector,
    ScalePolicy,
    ZeroVectorError,
    decode,
    drive_encode,
    drive_plus_encode,
)
from drive.transforms import Family, RotationSpec, rotation_dim

MAGIC = 0x44
VERSION = 0x01
HEADER = struct.Struct("<BBBBBHIQ")
HEADER_SIZE = HEADER.size  # 19
NO_ROTATION = 255
FLAG_ZERO = 0x01

SCALE_COUNT = {
    Algorithm.DRIVE: 1,
    Algorithm.DRIVE_PLUS: 2,
    Algorithm.HADAMARD_SQ: 2,
    Algorithm.TERNGRAD: 1,
}


class CodecError(ValueError):
    """Base class for every frame parsing failure."""


class BadMagicError(CodecError):
    pass


class UnknownVersionError(CodecError):
    pass


class UnknownAlgorithmError(CodecError):
    pass


class UnknownRotationError(CodecError):
    pass


class TruncatedFrameError(CodecError):
    pass


class TrailingBytesError(CodecError):
    pass


class MalformedFrameError(CodecError):
    """Header fields are individually valid but inconsistent, or padding bits are set."""


@dataclass(frozen=True)
class ZeroVector:
    """The all-zero vector; carries only the header."""

    algorithm: Algorithm
    rotation: RotationSpec | None
    original_len: int


Message = EncodedVector | BaselineMessage | ZeroVector


def pack_bits(bits) -> bytes:
    """LSB-first packing; ``(1,0,1,1,0,0,0,0)`` becomes ``b'\\x0d'``."""
    return np.packbits(np.asarray(bits, dtype=bool), bitorder="little").tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; rejects set bits past ``count``."""
    raw = np.frombuffer(data, dtype=np.uint8)
    if raw.size != (count + 7) // 8:
        raise MalformedFrameError(f"expected {(count + 7) // 8} payload bytes, got {raw.size}")
    bits = np.unpackbits(raw, bitorder="little").astype(bool)
    if bits[count:].any():
        raise MalformedFrameError("unused trailing payload bits must be zero")
    return bits[:count]


def payload_bits(algorithm: Algorithm, family: Family | None, original_len: int) -> int:
    if algorithm is Algorithm.TERNGRAD:
        return 2 * original_len
    return rotation_dim(original_len, family)


def _fields(msg: Message):
    """``(algorithm, rotation, original_len, scales, bits)`` for any message."""
    if isinstance(msg, ZeroVector):
        return msg.algorithm, msg.rotation, msg.original_len, (), None
    if isinstance(msg, EncodedVector):
        scales = (msg.scale0,) if msg.algorithm is Algorithm.DRIVE else (msg.scale0, msg.scale1)
        return msg.algorithm, msg.rotation, msg.original_len, scales, np.asarray(msg.bits, dtype=bool)
    if isinstance(msg, BaselineMessage):
        bits = np.asarray(msg.bits, dtype=bool)
        if msg.algorithm is Algorithm.TERNGRAD:
            bits = np.concatenate([bits, np.asarray(msg.sign_bits, dtype=bool)])
        return msg.algorithm, msg.rotation, msg.original_len, tuple(msg.aux), bits
    raise TypeError(f"cannot serialize {type(msg).__name__}")


def serialize(msg: Message) -> bytes:
    alg, rot, n, scales, bits = _fields(msg)
    alg = Algorithm(alg)
    if not 1 <= n < 2**32:
        raise ValueError(f"vector length {n} does not fit the frame")
    if (rot is None) != (alg is Algorithm.TERNGRAD):
        raise ValueError("TernGrad frames carry no rotation and every other algorithm needs one")
    rot_id = NO_ROTATION if rot is None else int(rot.family)
    seed = 0 if rot is None else rot.seed
    zero = isinstance(msg, ZeroVector)
    head = HEADER.pack(MAGIC, VERSION, int(alg), rot_id, FLAG_ZERO if zero else 0, 0, n, seed)
    if zero:
        return head
    if len(scales) != SCALE_COUNT[alg]:
        raise ValueError(f"{alg.name} needs {SCALE_COUNT[alg]} scales, got {len(scales)}")
    expected = payload_bits(alg, None if rot is None else rot.family, n)
    if bits.size != expected:
        raise ValueError(f"{alg.name} message has {bits.size} bits, frame needs {expected}")
    return head + struct.pack(f"<{len(scales)}d", *scales) + pack_bits(bits)


def deserialize(data: bytes) -> Message:
    data = bytes(data)
    if len(data) >= 1 and data[0] != MAGIC:
        raise BadMagicError(f"bad magic byte 0x{data[0]:02x}")
    if len(data) >= 2 and data[1] != VERSION:
        raise UnknownVersionError(f"unknown frame version {data[1]}")
    if len(data) >= 3 and data[2] not in SCALE_COUNT.keys():
        raise UnknownAlgorithmError(f"unknown algorithm id {data[2]}")
    if len(data) >= 4 and data[3] not in (0, 1, NO_ROTATION):
        raise UnknownRotationError(f"unknown rotation id {data[3]}")
    if len(data) < HEADER_SIZE:
        raise TruncatedFrameError(f"frame header needs {HEADER_SIZE} bytes, got {len(data)}")
    _, _, alg_id, rot_id, flags, reserved, n, seed = HEADER.unpack_from(data)
    alg = Algorithm(alg_id)
    if flags & ~FLAG_ZERO or reserved:
        raise MalformedFrameError("unknown flag or reserved bits set")
    if n == 0:
        raise MalformedFrameError("vector length must be positive")
    if (rot_id == NO_ROTATION) != (alg is Algorithm.TERNGRAD):
        raise MalformedFrameError(f"rotation id {rot_id} does not fit algorithm {alg.name}")
    if alg is Algorithm.HADAMARD_SQ and rot_id != Family.HADAMARD:
        raise MalformedFrameError("HadamardSQ frames must use the Hadamard rotation")
    if rot_id == NO_ROTATION:
        if seed:
            raise MalformedFrameError("frames without a rotation must carry seed 0")
        rot = None
    else:
        family = Family(rot_id)
        rot = RotationSpec(family, seed, rotation_dim(n, family))

    if flags & FLAG_ZERO:
        if len(data) > HEADER_SIZE:
            raise TrailingBytesError(f"{len(data) - HEADER_SIZE} bytes after a zero-vector frame")
        return ZeroVector(alg, rot, n)

    k = SCALE_COUNT[alg]
    nbits = payload_bits(alg, None if rot is None else rot.family, n)
    total = HEADER_SIZE + 8 * k + (nbits + 7) // 8
    if len(data) < total:
        raise TruncatedFrameError(f"frame needs {total} bytes, got {len(data)}")
    if len(data) > total:
        raise TrailingBytesError(f"{len(data) - total} unexpected bytes after the frame")
    scales = struct.unpack_from(f"<{k}d", data, HEADER_SIZE)
    bits = unpack_bits(data[HEADER_SIZE + 8 * k :], nbits)

    if alg is Algorithm.DRIVE:
        return EncodedVector(alg, rot, scales[0], None, bits, n)
    if alg is Algorithm.DRIVE_PLUS:
        return EncodedVector(alg, rot, scales[0], scales[1], bits, n)
    if alg is Algorithm.HADAMARD_SQ:
        return BaselineMessage(alg, rot, scales, bits, n)
    return BaselineMessage(alg, None, scales, bits[:n], n, bits[n:])


def bit_budget(msg: Message) -> int:
    """Bits this message occupies on the wire."""
    return 8 * len(serialize(msg))


def compress(
    x,
    algorithm: Algorithm,
    family: Family | None = Family.HADAMARD,
    policy: ScalePolicy | None = ScalePolicy.UNBIASED,
    seed: int = 0,
) -> Message:
    """Encode ``x``; the zero vector becomes a :class:`ZeroVector` instead of failing.

    ``seed`` picks the rotation and, for the stochastic baselines, the
    sender-side rounding stream.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    alg = Algorithm(algorithm)
    rot = None if alg is Algorithm.TERNGRAD else RotationSpec(family, seed, rotation_dim(x.size, family))
    try:
        if alg is Algorithm.DRIVE:
            return drive_encode(x, rot, policy)
        if alg is Algorithm.DRIVE_PLUS:
            return drive_plus_encode(x, rot, policy)
        if alg is Algorithm.HADAMARD_SQ:
            return hadamard_sq_encode(x, rot, seed)
        return terngrad_encode(x, seed)
    except ZeroVectorError:
        if x.size == 0:
            raise
        return ZeroVector(alg, rot, x.size)


def decompress(msg: Message) -> np.ndarray:
    if isinstance(msg, ZeroVector):
        return np.zeros(msg.original_len)
    if isinstance(msg, EncodedVector):
        return decode(msg)
    if msg.algorithm is Algorithm.HADAMARD_SQ:
        return hadamard_sq_decode(msg)
    return terngrad_decode(msg)
