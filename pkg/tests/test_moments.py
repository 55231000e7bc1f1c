from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from snakerange.ensemble import forest_batches, occupation_moment_mc
from snakerange.excursion import sample_duration
from snakerange.moments import (
    Ball, KernelConstants, PiecewisePolynomial, ball_green_integral, bm_hit_integral, bm_hit_prob,
    conditional_first_moment, gamma_generating, gamma_seq, green, green_constant, h_hierarchy,
    occupation_first_moment, occupation_second_moment, occupation_window_moment, window_second_moment,
)
from snakerange.rng import stream
from snakerange.snake import path_continuation

A5 = Ball(np.array([2.0, 0, 0, 0, 0]), 0.5)


def _taylor_one_minus_sqrt(N):
    # coefficients of 1 - sqrt(1 - x) from the binomial series, computed independently
    out = []
    c = Fraction(1)
    for n in range(1, N + 1):
        c = c * (Fraction(1, 2) - (n - 1)) / n
        out.append(-c * (-1) ** n)
    return out


def test_gamma_sequence():
    g = gamma_seq(30)
    assert g[:3] == [Fraction(1, 2), Fraction(1, 8), Fraction(1, 16)]
    assert g == _taylor_one_minus_sqrt(30)
    assert all(v > 0 for v in g)


@pytest.mark.parametrize("lam", [0.1, 0.5])
def test_gamma_generating_function(lam):
    assert abs(gamma_generating(lam, 60) - (1 - math.sqrt(1 - lam))) <= 1e-10


def test_gamma_generating_error_at_09_is_the_series_tail():
    # at lam = 0.9 the sixty-term sum misses a tail of order 1e-5; longer sums close it
    lam = 0.9
    exact = 1 - math.sqrt(1 - lam)
    err60 = exact - gamma_generating(lam, 60)
    # float terms from the ratio gamma_{n+1} / gamma_n = (2n - 1) / (2n + 2)
    g, terms = 0.5, []
    for n in range(1, 3000):
        if n > 60:
            terms.append(g * lam ** n)
        g *= (2 * n - 1) / (2 * n + 2)
    tail = math.fsum(terms)
    assert err60 == pytest.approx(tail, rel=1e-6)
    assert err60 > 1e-6
    assert abs(exact - gamma_generating(lam, 400)) < 1e-10


def test_h_hierarchy_zero_test_function():
    for m in h_hierarchy(PiecewisePolynomial.constant(0), 5, 3):
        assert m.moment == 0


@pytest.mark.parametrize("t,T", [(0, 1), (1, 2), (Fraction(1, 2), 3), (Fraction(2, 7), Fraction(9, 4))])
def test_window_second_moment_identity(t, T):
    t, T = Fraction(t), Fraction(T)
    table = h_hierarchy(PiecewisePolynomial.indicator(0, T - t), 2, T)
    assert table[1].moment == 4 * ((T - t) ** 3 / 3 + (T - t) ** 2 * t)
    assert table[1].moment == window_second_moment(t, T)


def test_window_second_moment_example():
    assert window_second_moment(1, 2) == Fraction(16, 3)


def test_second_moment_polynomial_identity_on_the_last_piece():
    # on [a, inf) with a = T - t, 2 h_2(s) = -8a^3/3 + 4a^2 s exactly
    a = Fraction(3, 5)
    h2 = h_hierarchy(PiecewisePolynomial.indicator(0, a), 2, 1)[1].h
    for s in (a, Fraction(1), Fraction(7, 3), Fraction(11)):
        assert 2 * h2(s) == -8 * a ** 3 / 3 + 4 * a * a * s


def test_first_moment_of_a_constant_test_function():
    for t in (Fraction(1, 3), Fraction(2), Fraction(5)):
        assert h_hierarchy(PiecewisePolynomial.constant(1), 1, t)[0].moment == t


def test_moments_are_nonnegative_and_h_is_continuous():
    phi = PiecewisePolynomial.indicator(Fraction(1, 4), Fraction(3, 2))
    for m in h_hierarchy(phi, 8, 2):
        assert m.moment >= 0
        assert m.h.is_continuous()


def test_h_hierarchy_matches_the_closed_form_laplace_transform():
    # with phi = 1, N[(int_0^t (Y_s, 1) ds)^n] = n! h_n(t) with h_n(t) = gamma-type coefficients * t^(2n-1)
    # recurrence: h_1 = t, h_n = 2 sum int h_k h_{n-k}; compare with a direct float recursion on a grid
    t = Fraction(3, 2)
    table = h_hierarchy(PiecewisePolynomial.constant(1), 4, t)
    coef = {1: 1.0}
    for n in range(2, 5):
        # h_n(s) = c_n s^(2n-1): c_n = 2 sum c_k c_{n-k} / (2n - 1)
        coef[n] = 2 * sum(coef[k] * coef[n - k] for k in range(1, n)) / (2 * n - 1)
    for n in range(1, 5):
        assert float(table[n - 1].moment) == pytest.approx(math.factorial(n) * coef[n] * 1.5 ** (2 * n - 1))


def test_green_constant_and_heat_kernel():
    assert green(np.zeros(5), np.array([1.0, 0, 0, 0, 0]), 5) == pytest.approx(1 / (4 * math.pi ** 2), rel=1e-14)
    assert green_constant(3) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    with pytest.raises(ValueError):
        green_constant(2)
    k = KernelConstants(3)
    g = np.linspace(-6, 6, 121)
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1)
    assert abs(k.heat(1.0, X).sum() * (g[1] - g[0]) ** 3 - 1) < 1e-3


def test_heat_kernel_integrates_to_the_green_kernel():
    x = np.array([1.3, 0, 0, 0, 0])
    k = KernelConstants(5)
    val, _ = integrate.quad(lambda t: float(k.heat(t, x)), 0, np.inf, limit=200)
    assert val == pytest.approx(green(x, np.zeros(5), 5), rel=1e-8)


def test_first_moment_quadrature_matches_the_shell_theorem():
    for x in ([0, 0, 0, 0, 0], [2.2, 0.1, 0, 0, 0], [1.8, 0, 0.2, 0, 0]):
        assert occupation_first_moment(x, A5) == pytest.approx(ball_green_integral(x, A5), rel=1e-6)


def test_first_moment_shrinks_with_the_region():
    vals = [occupation_first_moment(np.zeros(5), Ball(A5.center, r)) for r in (0.5, 0.1, 0.01, 0.0)]
    assert vals[-1] == 0.0 and all(a > b for a, b in zip(vals, vals[1:]))


@settings(max_examples=25, deadline=None)
@given(shift=st.lists(st.floats(-5, 5), min_size=5, max_size=5))
def test_first_moment_translation_invariance(shift):
    s = np.array(shift)
    x = np.array([0.3, 0.1, 0, 0, 0])
    moved = occupation_first_moment(x + s, Ball(A5.center + s, A5.radius))
    assert moved == pytest.approx(occupation_first_moment(x, A5), rel=1e-6)


def test_window_moments_add_up():
    x = np.zeros(5)
    parts = [occupation_window_moment(x, A5, a, b) for a, b in [(0, 0.05), (0.05, 400), (400, math.inf)]]
    assert sum(parts) == pytest.approx(occupation_first_moment(x, A5), rel=1e-6)


def test_first_moment_snake_estimate():
    est = occupation_moment_mc(A5, 5000, stream(1))
    total = est.estimate + est.lower_tail + est.upper_tail
    assert abs(total - est.full_target) <= 3 * est.stderr
    assert abs(est.estimate - est.window_target) <= 3 * est.stderr


def test_second_moment_homogeneity():
    x = np.array([0.4, 0.2, 0, 0, 0])
    base = occupation_second_moment(x, A5)
    for lam in (0.5, 2.0, 3.0):
        scaled = occupation_second_moment(lam * x, Ball(lam * A5.center, lam * A5.radius))
        # G ~ lam^(2-d), dy ~ lam^d: lam^(2-d+d) * (lam^(2-d+d))^2 = lam^6 in every dimension
        assert scaled == pytest.approx(lam ** 6 * base, rel=1e-6)


def test_second_moment_refinement_and_empty_region():
    x = np.zeros(5)
    assert occupation_second_moment(x, A5, rtol=1e-6) == pytest.approx(occupation_second_moment(x, A5, rtol=1e-10),
                                                                      rel=1e-4)
    assert occupation_second_moment(x, Ball(A5.center, 0.0)) == 0.0
    with pytest.raises(ValueError):
        occupation_second_moment(np.zeros(4), Ball(np.array([2.0, 0, 0, 0]), 0.5))


def test_second_moment_snake_estimate():
    rng = stream(2)
    m = 20000
    sample = sample_duration(0.05, 400.0, rng, size=m)
    vals = np.empty(m)
    for start, forest in forest_batches(sample.durations, 0.005, 1 << 16, np.zeros(5), 5, rng):
        vals[start:start + forest.offsets.size - 1] = forest.reduce(np.where(A5.contains(forest.tips),
                                                                            forest.weights, 0.0))
    sq = sample.window_mass * vals ** 2
    se = sq.std(ddof=1) / math.sqrt(m)
    assert abs(sq.mean() - occupation_second_moment(np.zeros(5), A5)) <= 3 * se


def test_conditional_first_moment_trivial_cases():
    assert conditional_first_moment(np.zeros((1, 5)), np.array([0.0]), A5) == 0.0
    x = np.array([0.5, 0.3, 0, 0, 0])
    pts = np.tile(x, (11, 1))
    assert conditional_first_moment(pts, np.linspace(0, 0.7, 11), A5) == pytest.approx(
        2 * 0.7 * ball_green_integral(x, A5), rel=1e-12)


def test_conditional_first_moment_snake_continuation():
    ds, k0, cap = 1e-4, 20, 5 * 10 ** 4
    spine = np.zeros((k0 + 1, 5))
    spine[:, 0] = np.linspace(0.0, 0.3, k0 + 1)  # smooth at the scale of the distance to A
    times = np.arange(k0 + 1) * math.sqrt(ds)
    A = Ball(np.array([0.15, 0.35, 0, 0, 0]), 0.25)
    exact = conditional_first_moment(spine, times, A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        capped = 2 * np.trapezoid([occupation_window_moment(p, A, 0, cap * ds) for p in spine], times)
    rng = stream(3)
    vals = np.array([np.sum(w * A.contains(t)) for t, w, _ in
                     (path_continuation(spine, ds, rng, max_steps=cap) for _ in range(3000))])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    # walks are cut after cap steps; the mass of longer sub-excursions is the tail budget
    assert abs(vals.mean() - exact) <= 3 * se + (exact - capped)


def test_bm_hit_prob():
    assert bm_hit_prob(np.array([2.0, 0, 0, 0, 0]), 1.0, 5) == 0.125
    assert bm_hit_prob(np.array([0.5, 0, 0]), 1.0, 3) == 1.0
    with pytest.raises(ValueError):
        bm_hit_prob(np.zeros(3), 0.0, 3)


@pytest.mark.parametrize("r", [0.05, 0.3, 0.9])
def test_bm_hit_integral(r):
    d, R0 = 5, 2.0
    S = 2 * math.pi ** 2.5 / math.gamma(2.5)
    val, _ = integrate.quad(lambda s: S * s ** (d - 1) * min(1.0, (r / s) ** (d - 2)) if s > 0 else 0.0,
                            0, R0, points=[r])
    assert bm_hit_integral(R0, r, d) == pytest.approx(val, rel=1e-8)
    # bounded by c r^(d-2) with c independent of r in (0, 1)
    assert bm_hit_integral(R0, r, d) <= S * R0 ** 2 * r ** (d - 2)
