from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from snakerange.excursion import (
    ITO_DENSITY, LifetimePath, condition_height, dyck_heights, duration_mass, estimate_height_mass,
    expected_dyck_max, height_mass, local_time_band, rescale, sample_duration, sample_normalized_excursion,
)
from snakerange.rng import stream


def test_n1_is_the_unique_dyck_path():
    p = sample_normalized_excursion(1, stream(0))
    assert np.allclose(p.values, [0.0, math.sqrt(0.5), 0.0])
    assert p.contour_step == 0.5


def test_n2_paths_are_uniform_over_the_two_dyck_paths():
    rng = stream(1)
    counts = Counter(tuple(dyck_heights(2, rng)) for _ in range(4000))
    assert set(counts) == {(0, 1, 2, 1, 0), (0, 1, 0, 1, 0)}
    # binomial(4000, 1/2): 3 sd = 95
    assert abs(counts[(0, 1, 2, 1, 0)] - 2000) < 95


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 400), seed=st.integers(0, 10 ** 6))
def test_sampled_paths_satisfy_the_lattice_invariants(n, seed):
    p = sample_normalized_excursion(n, stream(seed))
    p.check()
    assert p.duration == 1.0 and p.step_count == 2 * n
    assert np.allclose(np.abs(np.diff(p.values)), math.sqrt(p.contour_step))


def test_expected_max_oracle_small_cases():
    # by enumeration: n=1 max 1; n=2 maxima {1, 2}; n=3 maxima {1,2,2,2,3} -> 10/5
    assert expected_dyck_max(1) == 1.0
    assert expected_dyck_max(2) == 1.5
    assert expected_dyck_max(3) == 2.0


def test_mean_max_height_matches_exact_enumeration():
    n, m = 2000, 3000
    rng = stream(2)
    mx = np.array([dyck_heights(n, rng).max() for _ in range(m)], dtype=float)
    exact = expected_dyck_max(n)
    assert abs(mx.mean() - exact) < 3 * mx.std(ddof=1) / math.sqrt(m)
    # E[max] = sqrt(pi n) - 3/2 + o(1), so the duration-1 value tends to sqrt(pi/2)
    assert exact == pytest.approx(math.sqrt(math.pi * n) - 1.5, abs=0.05)


def test_degenerate_duration_window():
    s = sample_duration(1.0, 1.0, stream(0), size=5)
    assert np.all(s.durations == 1.0)


def test_duration_median_and_window_mass():
    s = sample_duration(1.0, 4.0, stream(3), size=200000)
    assert np.median(s.durations) == pytest.approx(16 / 9, rel=5e-3)
    # 2c (1 - 1/2) = c with c = 1/(2 sqrt(2 pi))
    assert s.window_mass == pytest.approx(1 / (2 * math.sqrt(2 * math.pi)), rel=1e-14)
    assert s.weight * s.durations.size == pytest.approx(s.window_mass)
    assert np.all((s.durations >= 1.0) & (s.durations <= 4.0))
    assert s.upper_tail_mass == pytest.approx(2 * ITO_DENSITY * 0.5)


def test_density_constant_follows_from_the_height_normalization():
    # N(sup > t) = 2c E[max of a normalized excursion] / t must equal 1/(2t)
    assert 2 * ITO_DENSITY * math.sqrt(math.pi / 2) == pytest.approx(0.5, rel=1e-15)


def test_duration_law_ks():
    lo, hi = 0.5, 50.0
    s = sample_duration(lo, hi, stream(4), size=100000)
    a, b = lo ** -0.5, hi ** -0.5
    cdf = lambda r: (a - np.asarray(r) ** -0.5) / (a - b)
    assert stats.kstest(s.durations, cdf).pvalue > 0.01


def test_duration_mass_is_the_density_integral():
    val, _ = integrate.quad(lambda r: ITO_DENSITY * r ** -1.5, 0.3, 7.0)
    assert duration_mass(0.3, 7.0) == pytest.approx(val, rel=1e-10)


def test_invalid_duration_bounds():
    for lo, hi in [(0.0, 1.0), (2.0, 1.0), (1.0, math.inf)]:
        with pytest.raises(ValueError):
            sample_duration(lo, hi, stream(0))


def test_rescale():
    p = sample_normalized_excursion(50, stream(5))
    assert np.array_equal(rescale(p, 1.0).values, p.values)
    q = rescale(p, 16.0)
    assert q.contour_step == pytest.approx(16 * p.contour_step)
    assert np.allclose(q.values, 4 * p.values)
    one = rescale(sample_normalized_excursion(1, stream(0)), 4.0)
    assert np.allclose(one.values, [0.0, math.sqrt(2), 0.0]) and one.contour_step == 2.0
    with pytest.raises(ValueError):
        rescale(p, 0.0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.01, 100), b=st.floats(0.01, 100))
def test_rescale_composes(a, b):
    p = sample_normalized_excursion(20, stream(6))
    two = rescale(rescale(p, a), a * b)
    one = rescale(p, a * b)
    assert np.allclose(two.values, one.values, rtol=1e-14, atol=0)


def test_full_window_height_mass_is_normalized():
    for t in (0.25, 0.5, 1.0):
        assert height_mass(t) == pytest.approx(1 / (2 * t), rel=1e-8)


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_height_mass_estimator_converges(t):
    est, se, _ = estimate_height_mass(t, 1e-3 * t * t, 100 * t * t, 4000, stream(7, int(4 * t)), n=400)
    excluded = 1 / (2 * t) - height_mass(t, 1e-3 * t * t, 100 * t * t)
    assert abs(est + excluded - 1 / (2 * t)) < 3 * se + 0.02 / t


def test_accepted_paths_exceed_the_level():
    rng = stream(8)
    for _ in range(20):
        hc = condition_height(0.5, 0.01, 25.0, rng, n=200)
        assert hc.path.max_value > 0.5
        assert hc.weight + hc.excluded_mass == pytest.approx(1.0, rel=1e-8)


def test_local_time_band():
    p = sample_normalized_excursion(1, stream(0))
    idx, w = local_time_band(p, 0.5, 0.5)
    assert list(idx) == [1] and w == pytest.approx(1.0)
    idx, _ = local_time_band(p, 1.0, 0.1)
    assert idx.size == 0


def test_band_partition_recovers_the_duration():
    p = rescale(sample_normalized_excursion(5000, stream(9)), 3.0)
    delta = 0.01
    total = 0.0
    for t in np.arange(0.0, p.max_value + delta, delta):
        idx, w = local_time_band(p, t, delta)
        total += delta * w * idx.size
    assert total == pytest.approx(3.0, rel=1e-12)


def test_path_rejects_bad_shapes():
    with pytest.raises(ValueError):
        LifetimePath(np.array([0, 1]), 1.0)
    with pytest.raises(ValueError):
        LifetimePath(np.array([0, 1, 0]), 0.0)
