"""One-bit vector compression by random rotation and sign quantization.

DRIVE rotates a vector, sends one sign bit per coordinate plus a scale, and
the receiver undoes the rotation. DRIVE+ picks the two reconstruction levels
by exact 1-D 2-means instead. The package also has two baseline compressors,
a bit-exact wire codec, a distributed mean-estimation simulator and a small
compressed-SGD harness.
"""

from drive.analytics import AnalyticBound, Distribution, bound_value, expected_l1_on_sphere, mc_vnmse
from drive.baselines import BaselineMessage
from drive.codec import ZeroVector, bit_budget, compress, decompress, deserialize, serialize
from drive.compressors import Scheme, decode_batch, encode_batch, roundtrip_batch
from drive.dme import DmeConfig, InputMode, TrialReport, run_experiment, run_trial
from drive.kmeans1d import two_means_brute, two_means_exact
from drive.quantizers import (
    Algorithm,
    EncodedVector,
    ScalePolicy,
    ZeroVectorError,
    drive_decode,
    drive_encode,
    drive_plus_decode,
    drive_plus_encode,
)
from drive.transforms import Family, RotationSpec

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "AnalyticBound",
    "BaselineMessage",
    "Distribution",
    "DmeConfig",
    "EncodedVector",
    "Family",
    "InputMode",
    "RotationSpec",
    "ScalePolicy",
    "Scheme",
    "TrialReport",
    "ZeroVector",
    "ZeroVectorError",
    "bit_budget",
    "bound_value",
    "compress",
    "decode_batch",
    "decompress",
    "deserialize",
    "drive_decode",
    "drive_encode",
    "drive_plus_decode",
    "drive_plus_encode",
    "encode_batch",
    "expected_l1_on_sphere",
    "mc_vnmse",
    "roundtrip_batch",
    "run_experiment",
    "run_trial",
    "serialize",
    "two_means_brute",
    "two_means_exact",
]
