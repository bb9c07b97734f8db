import math

import mpmath
import numpy as np
import pytest
from scipy import special, stats

from drive.analytics import (
    MOMENTS,
    AnalyticBound,
    Distribution,
    bound_value,
    expected_l1_on_sphere,
    log_beta,
    mc_vnmse,
    sample,
    sample_rows,
)
from drive.quantizers import Algorithm, ScalePolicy
from drive.transforms import BatchRotation, Family

H, U = Family.HADAMARD, Family.UNIFORM


def mean_within(v: np.ndarray, target: float, k: float = 4.0) -> bool:
    return abs(v.mean() - target) < k * v.std(ddof=1) / math.sqrt(v.size)


# samplers


def test_normal_mean():
    v = sample(Distribution.NORMAL, 1, 1_000_000)
    assert abs(v.mean()) < 4 / math.sqrt(v.size)


def test_lognormal_and_exponential_means():
    assert mean_within(sample(Distribution.LOGNORMAL, 2, 1_000_000), math.exp(0.5))
    assert mean_within(sample(Distribution.EXPONENTIAL, 3, 1_000_000), 1.0)


@pytest.mark.parametrize(
    "dist,cdf",
    [
        (Distribution.NORMAL, stats.norm.cdf),
        (Distribution.LOGNORMAL, stats.lognorm(1.0).cdf),
        (Distribution.EXPONENTIAL, stats.expon.cdf),
    ],
)
def test_sampler_ks(dist, cdf):
    assert stats.kstest(sample(dist, 4, 100_000), cdf).statistic < 0.01


def test_sampler_determinism_and_rows():
    a = sample(Distribution.LOGNORMAL, 11, 50)
    assert np.array_equal(a, sample(Distribution.LOGNORMAL, 11, 50))
    assert np.array_equal(sample(Distribution.LOGNORMAL, 11, 20), a[:20])
    rows = sample_rows(Distribution.EXPONENTIAL, [5, 6], 8)
    assert np.array_equal(rows[1], sample(Distribution.EXPONENTIAL, 6, 8))
    assert (rows > 0).all()
    with pytest.raises(ValueError):
        sample(Distribution.NORMAL, 0, 0)


def test_moments_table():
    for dist, (m2, m3) in MOMENTS.items():
        v = sample(dist, 8, 2_000_000)
        assert mean_within(v * v, m2, 5)
    assert MOMENTS[Distribution.NORMAL][1] == pytest.approx(stats.norm.expect(lambda t: abs(t) ** 3), rel=1e-9)
    assert MOMENTS[Distribution.LOGNORMAL] == (math.e**2, math.exp(4.5))


# log_beta


def test_log_beta_classical_values():
    assert math.exp(log_beta(0.5, 0.5)) == pytest.approx(math.pi, rel=1e-14)
    assert math.exp(log_beta(0.5, 1.5)) == pytest.approx(math.pi / 2, rel=1e-14)
    assert log_beta(1.0, 1.0) == 0.0


def test_log_beta_against_mpmath(gen):
    mpmath.mp.dps = 40
    args = [(0.5, (d - 1) / 2) for d in (2, 3, 16, 129, 4096, 10**6)]
    args += [tuple(gen.uniform(0.05, 500, size=2)) for _ in range(200)]
    args += [tuple(10 ** gen.uniform(-3, 7, size=2)) for _ in range(200)]
    for a, b in args:
        ref = mpmath.log(mpmath.beta(a, b))
        got = log_beta(a, b)
        assert abs(got - float(ref)) <= 1e-12 * max(1.0, abs(float(ref)))


def test_log_beta_rejects_non_positive():
    for a, b in ((0, 1), (1, -2), (-0.5, 0.5)):
        with pytest.raises(ValueError):
            log_beta(a, b)


# expected L1 on the sphere


def test_expected_l1_examples():
    assert expected_l1_on_sphere(2) == pytest.approx(4 / math.pi, rel=1e-14)
    assert expected_l1_on_sphere(3) == pytest.approx(1.5, rel=1e-14)
    with pytest.raises(ValueError):
        expected_l1_on_sphere(1)


def test_expected_l1_monte_carlo_at_8():
    n = 100_000
    e1 = np.zeros((n, 8))
    e1[:, 0] = 1.0
    points = BatchRotation(U, np.arange(n, dtype=np.uint64) + 99, 8).forward(e1)
    assert mean_within(np.abs(points).sum(axis=1), expected_l1_on_sphere(8))


def test_expected_l1_sweep_is_monotone_and_bounded():
    ds = np.unique(np.geomspace(2, 10**4, 400).astype(int))
    r = np.array([expected_l1_on_sphere(int(d)) ** 2 / d for d in ds])
    # E||T||_1 >= sqrt(2d / pi) pins the ratio above 2/pi, so it falls toward the limit from 8/pi^2 at d=2
    assert r[0] == pytest.approx(8 / math.pi**2, rel=1e-14)
    assert np.all(np.diff(r) < 0)
    assert np.all(r > 2 / math.pi)
    assert r[-1] == pytest.approx(2 / math.pi, rel=1e-4)
    assert all(expected_l1_on_sphere(int(d)) >= math.sqrt(2 * d / math.pi) for d in ds)


# bounds


def test_bound_examples():
    assert bound_value(AnalyticBound.BIASED_VNMSE_EXACT, 2) == pytest.approx((1 - 2 / math.pi) / 2, rel=1e-14)
    assert round(bound_value(AnalyticBound.BIASED_VNMSE_EXACT, 2), 6) == 0.181690
    assert round(AnalyticBound.UNBIASED_VNMSE_ASYMPTOTE.value_at(7), 6) == 0.570796
    assert bound_value(AnalyticBound.UNBIASED_VNMSE_LARGE_D, 10**5) <= 0.673
    assert bound_value(AnalyticBound.UNBIASED_VNMSE_CAP_292, 3) == 2.92
    assert bound_value(AnalyticBound.HADAMARD_VNMSE_CAP, 64) == 0.5


def test_bound_domains():
    with pytest.raises(ValueError):
        bound_value(AnalyticBound.UNBIASED_VNMSE_LARGE_D, 134)
    assert math.isfinite(bound_value(AnalyticBound.UNBIASED_VNMSE_LARGE_D, 135))
    for b in AnalyticBound:
        with pytest.raises(ValueError):
            bound_value(b, 1)


def test_large_d_bound_decreases_to_asymptote():
    vals = [bound_value(AnalyticBound.UNBIASED_VNMSE_LARGE_D, d) for d in (10**3, 10**4, 10**6, 10**9)]
    assert vals == sorted(vals, reverse=True)
    assert vals[-1] - (math.pi / 2 - 1) < 2e-3


# Monte-Carlo vNMSE


def test_mc_biased_uniform_matches_closed_form():
    mean, se = mc_vnmse(Algorithm.DRIVE, U, ScalePolicy.MIN_SSE, 16, 100_000, seed=1)
    target = bound_value(AnalyticBound.BIASED_VNMSE_EXACT, 16)
    assert target == pytest.approx(0.340669, abs=5e-7)
    assert abs(mean - target) < 3 * se


def test_mc_sharp_hadamard_input_is_exactly_half():
    x = np.array([1, 1, 0, 0]) / math.sqrt(2)
    mean, se = mc_vnmse(Algorithm.DRIVE, H, ScalePolicy.MIN_SSE, 4, 1000, seed=2, x=x)
    assert mean == pytest.approx(0.5, abs=1e-12)
    assert se < 1e-12


def test_mc_unbiased_respects_caps():
    for d in (4, 16, 64, 256):
        mean, _ = mc_vnmse(Algorithm.DRIVE, U, ScalePolicy.UNBIASED, d, 2000, seed=d)
        assert 0 <= mean <= 2.92
        if d >= 135:
            assert mean <= bound_value(AnalyticBound.UNBIASED_VNMSE_LARGE_D, d)


def test_mc_needs_100_trials():
    with pytest.raises(ValueError):
        mc_vnmse(Algorithm.DRIVE, U, ScalePolicy.UNBIASED, 8, 99, seed=0)


# Berry-Esseen


def rotated_coordinate_ks(d: int, n: int, seed: int) -> float:
    """KS distance between coordinate 5 of R(x)/sigma and N(0, 1) for i.i.d. LogNormal x."""
    sigma = math.sqrt(MOMENTS[Distribution.LOGNORMAL][0])
    vals = np.empty(n)
    step = max(1, (1 << 22) // d)
    for start in range(0, n, step):
        idx = np.arange(start, min(n, start + step), dtype=np.uint64)
        x = sample_rows(Distribution.LOGNORMAL, idx + np.uint64(seed << 32), d)
        vals[start : start + idx.size] = BatchRotation(H, idx + np.uint64(seed), d).forward(x)[:, 5] / sigma
    return stats.kstest(vals, special.ndtr).statistic


@pytest.mark.slow
def test_berry_esseen_convergence():
    n = 60_000
    ks = {d: rotated_coordinate_ks(d, n, seed=7) for d in (64, 512, 4096)}
    assert ks[64] > ks[512] > ks[4096]
    assert ks[4096] < 0.02
