"""Samplers, special functions and closed-form error laws."""

from __future__ import annotations

import enum
import math

import numpy as np

from drive import rng


class Distribution(enum.Enum):
    LOGNORMAL = "lognormal"
    NORMAL = "normal"
    EXPONENTIAL = "exp"


# E[x^2] and E[|x|^3] of one coordinate, used by the Berry-Esseen check
MOMENTS = {
    Distribution.NORMAL: (1.0, 2.0 * math.sqrt(2.0 / math.pi)),
    Distribution.LOGNORMAL: (math.e**2, math.exp(4.5)),
    Distribution.EXPONENTIAL: (2.0, 6.0),
}


def sample(distribution: Distribution, seed: int, count: int) -> np.ndarray:
    """``count`` i.i.d. draws; a pure function of ``(distribution, seed)``, prefix-stable in count."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return sample_rows(distribution, [seed], count)[0]


def sample_rows(distribution: Distribution, seeds, count: int) -> np.ndarray:
    """One independent row of draws per seed."""
    distribution = Distribution(distribution)
    if distribution is Distribution.EXPONENTIAL:
        return -np.log1p(-rng.uniforms(seeds, count, rng.TAG_SAMPLE))
    z = rng.normals(seeds, count, rng.TAG_SAMPLE)
    if distribution is Distribution.LOGNORMAL:
        return np.exp(z)
    return z


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# B_2k / (2k (2k - 1)) for k = 1..7
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156)


def _stirling_tail(x: float) -> float:
    """``lgamma(x) - ((x - 1/2) ln x - x + ln(2 pi) / 2)`` for ``x >= 10``."""
    inv2 = 1.0 / (x * x)
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * inv2 + c
    return acc / x


def log_beta(a: float, b: float) -> float:
    """``ln B(a, b)``.

    Small arguments go straight through ``math.lgamma``. Once the larger one
    reaches 10 the big ``lgamma`` terms are cancelled analytically and only
    their Stirling remainders are differenced, which keeps the relative error
    near machine precision even for ``B(1/2, 10^6)``.
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"Beta arguments must be positive, got ({a}, {b})")
    p, q = min(a, b), max(a, b)
    s = p + q
    if p >= 10.0:
        corr = _stirling_tail(p) + _stirling_tail(q) - _stirling_tail(s)
        return -0.5 * math.log(q) + _HALF_LOG_2PI + corr + (p - 0.5) * math.log(p / s) + q * math.log1p(-p / s)
    if q >= 10.0:
        corr = _stirling_tail(q) - _stirling_tail(s)
        return math.lgamma(p) + corr + p - p * math.log(s) + (q - 0.5) * math.log1p(-p / s)
    return math.lgamma(p) + math.lgamma(q) - math.lgamma(s)


def expected_l1_on_sphere(d: int) -> float:
    """``E ||T||_1`` for ``T`` uniform on the unit sphere in R^d: ``2d / ((d-1) B(1/2, (d-1)/2))``."""
    if d < 2:
        raise ValueError("expected_l1_on_sphere needs d >= 2")
    return 2.0 * d / ((d - 1) * math.exp(log_beta(0.5, (d - 1) / 2.0)))


class AnalyticBound(enum.Enum):
    BIASED_VNMSE_EXACT = "BiasedVnmseExact"
    UNBIASED_VNMSE_CAP_292 = "UnbiasedVnmseCap292"
    UNBIASED_VNMSE_LARGE_D = "UnbiasedVnmseLargeD"
    HADAMARD_VNMSE_CAP = "HadamardVnmseCap"
    UNBIASED_VNMSE_ASYMPTOTE = "UnbiasedVnmseAsymptote"

    def value_at(self, d: int) -> float:
        return bound_value(self, d)


def bound_value(name: AnalyticBound, d: int) -> float:
    name = AnalyticBound(name)
    if d < 2:
        raise ValueError("bounds are defined for d >= 2")
    if name is AnalyticBound.BIASED_VNMSE_EXACT:
        # uniform rotation, S = ||Rx||_1 / d
        return (1.0 - 2.0 / math.pi) * (1.0 - 1.0 / d)
    if name is AnalyticBound.UNBIASED_VNMSE_CAP_292:
        return 2.92
    if name is AnalyticBound.UNBIASED_VNMSE_LARGE_D:
        if d < 135:
            raise ValueError("the large-d bound holds only for d >= 135")
        k = 6.0 * math.pi**3 - 12.0 * math.pi**2
        return math.pi / 2.0 - 1.0 + math.sqrt((k * math.log(d) + 1.0) / d)
    if name is AnalyticBound.HADAMARD_VNMSE_CAP:
        return 0.5
    return math.pi / 2.0 - 1.0


def mc_vnmse(
    algorithm,
    rotation,
    policy,
    d: int,
    trials: int,
    seed: int,
    distribution: Distribution = Distribution.NORMAL,
    x: np.ndarray | None = None,
    batch: int = 4096,
) -> tuple[float, float]:
    """Monte-Carlo ``E ||x - xhat||^2 / ||x||^2`` with its standard error.

    Each trial draws a fresh vector (unless ``x`` is given) and a fresh
    rotation seed.
    """
    from drive.compressors import Scheme, roundtrip_batch

    if trials < 100:
        raise ValueError("mc_vnmse needs at least 100 trials")
    scheme = Scheme(algorithm, rotation, policy)
    if x is not None:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        d = x.size
    batch = max(1, min(batch, (1 << 24) // max(1, scheme.cost_per_row(d))))
    samples = []
    for start in range(0, trials, batch):
        idx = range(start, min(trials, start + batch))
        seeds = np.array([rng.derive_seed(seed, t, 0) for t in idx], dtype=np.uint64)
        if x is None:
            vseeds = [rng.derive_seed(seed, t, 1) for t in idx]
            xs = sample_rows(distribution, vseeds, d)
        else:
            xs = np.broadcast_to(x, (len(idx), d)).copy()
        xhat = roundtrip_batch(xs, scheme, seeds)
        err = ((xs - xhat) ** 2).sum(axis=1) / (xs * xs).sum(axis=1)
        samples.append(err)
    v = np.concatenate(samples)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
