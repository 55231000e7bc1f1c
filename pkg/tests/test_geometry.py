from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from snakerange.ensemble import hitting_prob_mc
from snakerange.geometry import (
    Ball, Box, Kernel, ScalingLaw, SpatialIndex, capacity, capacity_equivalence_report, coverage_volume,
    cube_distance, cube_neighborhood_mc, cube_reference, distance_profile, energy_constant, energy_rows,
    epsilon_volume, epsilon_volumes, f_energy, fit_support_exponent, grid_energy_separable, kernel_radial_integral,
    lebesgue_energy, lebesgue_grid, median_nn, s_energy, s_energy_sampled, scaling_rows, steiner_volume,
)
from snakerange.moments import ball_volume
from snakerange.rng import stream
from snakerange.snake import PointCloud, WeightedPointMeasure
from snakerange.spinetree import level_crossings, level_crossings_moment, sample_heights, spine_levels


# --- neighbor search and volumes ----------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 300), d=st.integers(1, 4), seed=st.integers(0, 10 ** 6),
       eps=st.floats(0.01, 0.5))
def test_spatial_index_matches_brute_force(n, d, seed, eps):
    rng = stream(seed)
    pts = rng.random((n, d))
    idx = SpatialIndex(pts, eps)
    q = rng.random((40, d)) * 1.4 - 0.2
    dist = np.linalg.norm(pts[None, :, :] - q[:, None, :], axis=2) if n else np.zeros((40, 0))
    assert np.array_equal(idx.any_within(q, eps), (dist <= eps).any(axis=1))
    for k in range(5):
        assert np.array_equal(idx.query(q[k], eps), np.flatnonzero(dist[k] <= eps))


def test_spatial_index_rejects_wide_queries():
    idx = SpatialIndex(np.zeros((3, 2)), 0.1)
    with pytest.raises(ValueError):
        idx.query(np.zeros(2), 0.2)
    with pytest.raises(ValueError):
        SpatialIndex(np.zeros((3, 2)), 0.0)


def test_single_point_volume():
    for d in (2, 3, 5):
        A = Ball(np.zeros(d), 0.2)
        vol, se = epsilon_volume(PointCloud(np.zeros((1, d))), A, 0.1, 200000, stream(d))
        assert abs(vol / A.volume - 2.0 ** -d) <= 3 * se / A.volume + 1e-12


def test_two_overlapping_discs_by_inclusion_exclusion():
    r, c = 0.3, 0.4
    lens = 2 * r * r * math.acos(c / (2 * r)) - 0.5 * c * math.sqrt(4 * r * r - c * c)
    exact = 2 * math.pi * r * r - lens
    box = Box(np.array([-0.5, -0.5]), np.array([0.9, 0.5]))
    cloud = PointCloud(np.array([[0.0, 0.0], [c, 0.0]]))
    vol, se = epsilon_volume(cloud, box, r, 400000, stream(1))
    assert abs(vol - exact) <= 3 * se
    cov, cse = coverage_volume(cloud, box, r, 200000, stream(2))
    assert abs(cov - exact) <= 3 * cse


def test_full_cover_disjoint_region_and_empty_cloud():
    g = (np.arange(11) - 5) * 0.1
    grid = PointCloud(np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T)
    A = Ball(np.zeros(2), 0.4)
    assert epsilon_volume(grid, A, 0.08, 5000, stream(3)) == (A.volume, 0.0)
    far = Ball(np.array([10.0, 0.0]), 1.0)
    assert epsilon_volume(grid, far, 0.08, 5000, stream(3)) == (0.0, 0.0)
    assert epsilon_volume(PointCloud(np.zeros((0, 2))), A, 0.1, 100, stream(3)) == (0.0, 0.0)
    with pytest.raises(ValueError):
        epsilon_volume(grid, A, 0.0, 100, stream(3))


def test_grid_and_kdtree_backends_agree():
    cloud = PointCloud(stream(4).normal(size=(3000, 3)) * 0.3)
    A = Ball(np.zeros(3), 0.5)
    a = epsilon_volume(cloud, A, 0.05, 20000, stream(5), backend="kdtree")
    b = epsilon_volume(cloud, A, 0.05, 20000, stream(5), backend="grid")
    assert a == b


def test_coverage_matches_hit_or_miss():
    cloud = PointCloud(stream(6).normal(size=(2000, 3)) * 0.3)
    A = Ball(np.zeros(3), 0.5)
    hm, hse = epsilon_volume(cloud, A, 0.04, 200000, stream(7))
    cv, cse = coverage_volume(cloud, A, 0.04, 200000, stream(8))
    assert abs(hm - cv) <= 3 * math.hypot(hse, cse)


def test_volumes_are_monotone_in_eps():
    cloud = PointCloud(stream(9).normal(size=(500, 3)))
    vols, _ = epsilon_volumes(cloud, Ball(np.zeros(3), 1.0), [0.01, 0.05, 0.1, 0.3], 20000, stream(10))
    assert np.all(np.diff(vols) >= 0)
    prof = distance_profile(cloud, Ball(np.zeros(3), 1.0), 20000, stream(10))
    assert np.array_equal(prof.volumes([0.01, 0.05, 0.1, 0.3]), vols)


def test_scaling_law():
    assert ScalingLaw(5).phi(0.1) == pytest.approx(10.0)
    assert ScalingLaw(4).phi(0.01) == pytest.approx(math.log(100))
    assert ScalingLaw(6).support_exponent == 4
    with pytest.raises(ValueError):
        ScalingLaw(4).phi(1.0)
    with pytest.raises(ValueError):
        ScalingLaw(3)


def test_scaling_rows_on_an_exact_profile():
    # a point at the center of a ball: volume kappa_d eps^d, phi eps^(4-d), so phi * vol = kappa_d eps^4
    d = 5
    A = Ball(np.zeros(d), 1.0)
    prof = distance_profile(PointCloud(np.zeros((1, d))), A, 100000, stream(11))
    eps = np.array([0.9, 0.8])
    rows = scaling_rows([prof], [1.0], eps, ScalingLaw(d), guard_factor=0.0)
    for r in rows:
        assert r.value == pytest.approx(ball_volume(d, 1.0) * r.eps ** 4, rel=0.05)
    with pytest.raises(ValueError):
        scaling_rows([prof], [1.0], eps[::-1], ScalingLaw(d))


def test_support_exponent_fit_recovers_a_power_law():
    eps = np.geomspace(0.3, 0.03, 6)
    vols = np.array([2.0 * eps ** 3, 2.2 * eps ** 3])
    fit = fit_support_exponent(vols, eps, 5, resolution=0.001)
    assert fit.exponent == pytest.approx(3.0, abs=1e-12)
    coarse = fit_support_exponent(vols, eps, 5, resolution=0.02)
    assert [r[3] for r in coarse.rows] == [bool(e >= 0.2) for e in eps]


# --- energies -----------------------------------------------------------------------------


def test_single_atom_energy():
    for d, w, eps in [(2, 1.0, 0.1), (5, 2.5, 0.3), (3, 0.7, 1.0)]:
        mu = WeightedPointMeasure.dirac(np.ones(d), w)
        assert s_energy(mu, eps) == pytest.approx(w * w * (2 * math.pi * eps * eps) ** (-d / 2), rel=1e-14)
    assert s_energy(WeightedPointMeasure.empty(3), 0.1) == 0.0
    with pytest.raises(ValueError):
        s_energy(WeightedPointMeasure.dirac(np.zeros(2)), 0.0)


def test_energy_is_invariant_under_rigid_motions_and_relabeling():
    rng = stream(12)
    pts = rng.normal(size=(200, 4))
    w = rng.random(200)
    mu = WeightedPointMeasure(pts, w)
    base = s_energy(mu, 0.3)
    Q = special_ortho_group.rvs(4, random_state=2)
    perm = rng.permutation(200)
    assert s_energy(WeightedPointMeasure(pts @ Q.T + 3.0, w), 0.3) == pytest.approx(base, rel=1e-10)
    assert s_energy(WeightedPointMeasure(pts[perm], w[perm]), 0.3) == pytest.approx(base, rel=1e-12)
    assert s_energy(mu, 0.3, cutoff=6.0) == pytest.approx(base, rel=1e-7)


def test_energy_of_a_point_pair_as_eps_grows():
    # with separation r the cross term peaks at eps = r / sqrt(d); beyond that the energy decreases
    mu = WeightedPointMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.ones(2))
    vals = [s_energy(mu, e) for e in (1.0, 1.5, 2.0, 4.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_grid_energy_separable_matches_the_double_sum():
    mu = lebesgue_grid(2, 4, 20)
    assert mu.total_mass == pytest.approx(1.0)
    assert s_energy(mu, 0.1) == pytest.approx(grid_energy_separable(2, 4, 20, 0.1), rel=1e-10)


def test_lebesgue_energy_is_the_grid_limit():
    exact = lebesgue_energy(2, 4, 0.05)
    assert grid_energy_separable(2, 4, 400, 0.05) == pytest.approx(exact, rel=1e-4)
    # one-dimensional factor: int int p(eps^2, x - y) dx dy over the unit interval
    eps = 0.3
    g = (np.arange(2000) + 0.5) / 2000
    num = np.exp(-(g[:, None] - g[None, :]) ** 2 / (2 * eps * eps)).mean() / math.sqrt(2 * math.pi * eps * eps)
    assert lebesgue_energy(1, 1, eps) == pytest.approx(num, rel=1e-5)


def test_sampled_energy_is_unbiased():
    rng = stream(13)
    mu = WeightedPointMeasure(rng.normal(size=(3000, 3)), rng.random(3000))
    exact = s_energy(mu, 0.2)
    est, se = s_energy_sampled(mu, 0.2, 2000, stream(14))
    assert abs(est - exact) <= 3 * se


def test_energy_constants_and_rows():
    assert energy_constant(5, "slice") == (2, pytest.approx(4 / 3))
    assert energy_constant(5, "occupation") == (4, pytest.approx(16 / 3))
    assert energy_constant(6, "occupation")[1] == pytest.approx(2.0)
    for d, mode in [(2, "slice"), (4, "occupation")]:
        with pytest.raises(ValueError):
            energy_constant(d, mode)
    rows = energy_rows([[16 / 3, 8.0], [32 / 3, 16.0]], [1.0, 2.0], [0.2, 0.1], 5, guard=0.15)
    assert rows[0].ratio == pytest.approx(1.0) and rows[0].stderr == pytest.approx(0.0)
    assert [r.guarded for r in rows] == [True, False]


# --- capacities ---------------------------------------------------------------------------


KERNELS = [Kernel("power", 0.5), Kernel("power", 1.0), Kernel("power", 1.5), Kernel("log-power", 1.0)]


def test_kernels():
    for k in KERNELS:
        assert k.is_decreasing()
    with pytest.raises(ValueError):
        Kernel("gauss", 1.0)
    with pytest.raises(ValueError):
        Kernel("power", 0.0)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.name)
def test_closed_form_capacities(k):
    rc, rho = 0.05, 0.3
    two = capacity(PointCloud(np.array([[0.0, 0.0], [rho, 0.0]])), k, 1e-10, r_cell=rc)
    assert two.cap == pytest.approx(2 / (float(k(rc)) + float(k(rho))), rel=1e-9)
    assert np.allclose(two.weights, 0.5)
    one = capacity(PointCloud(np.zeros((1, 2))), k, r_cell=rc)
    assert one.cap == pytest.approx(1 / float(k(rc)), rel=1e-15)
    with pytest.raises(ValueError):
        capacity(PointCloud(np.zeros((1, 2))), k)


def test_capacity_history_gap_and_energy():
    pts = stream(15).random((300, 2))
    k = Kernel("power", 1.0)
    res = capacity(PointCloud(pts), k, tol=1e-6)
    assert np.all(np.diff(res.history) <= 1e-15 * res.history[0])
    assert res.gap <= 1e-6 * res.value
    assert res.weights.sum() == pytest.approx(1.0) and np.all(res.weights >= 0)
    mu = WeightedPointMeasure(pts, res.weights)
    assert f_energy(mu, k, res.r_cell) == pytest.approx(res.value, rel=1e-10)
    # the uniform measure is feasible, so its energy bounds the minimum
    assert f_energy(WeightedPointMeasure(pts, np.full(300, 1 / 300)), k, res.r_cell) >= res.value


def test_capacity_is_monotone_under_inclusion():
    pts = stream(16).random((200, 2))
    k = Kernel("power", 1.5)
    caps = [capacity(PointCloud(pts[:m]), k, 1e-8, r_cell=0.01).cap for m in (20, 60, 200)]
    assert caps[0] <= caps[1] * (1 + 1e-6) and caps[1] <= caps[2] * (1 + 1e-6)


def test_capacity_scaling_and_self_ratio():
    pts = PointCloud(stream(17).random((150, 2)))
    big = PointCloud(2.0 * pts.points)
    kernels = KERNELS[:3]
    rep = capacity_equivalence_report(big, pts, kernels, tol=1e-9)
    for r, k in zip(rep.rows, kernels):
        assert r.ratio == pytest.approx(2.0 ** k.beta, rel=1e-6)
    same = capacity_equivalence_report(pts, pts, kernels)
    assert all(r.ratio == 1.0 for r in same.rows) and same.spread == 1.0


def test_coincident_points_are_rejected():
    with pytest.raises(ValueError):
        median_nn(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        capacity(PointCloud(np.array([[0.0, 0], [0, 0], [1, 0]])), Kernel("power", 1.0), r_cell=0.1)


# --- cube references ----------------------------------------------------------------------


def test_cube_reference_values():
    ref = cube_reference(2, 4, Kernel("power", 1.0))
    assert ref.volume_limit == pytest.approx(math.pi, rel=1e-15)
    assert ref.volume_limit_stated == pytest.approx(2 * math.pi, rel=1e-15)
    assert ref.energy_limit == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert ref.kernel_integral == 1.0 and ref.cap_comparison == 1.0
    div = cube_reference(2, 4, Kernel("power", 2.0))
    assert math.isinf(div.kernel_integral) and div.cap_comparison == 0.0
    with pytest.raises(ValueError):
        cube_reference(5, 4)


def test_kernel_radial_integral_by_quadrature():
    assert kernel_radial_integral(Kernel("power", 0.5), 2) == pytest.approx(2 / 3)
    # int_0^1 r log(1 + r) dr = 1/4 and int_0^1 r log r dr = -1/4
    assert kernel_radial_integral(Kernel("log-power", 1.0), 2) == pytest.approx(0.5, rel=1e-8)


def test_steiner_volume_against_hit_or_miss():
    for p, d, eps in [(2, 4, 0.05), (1, 3, 0.2), (2, 3, 0.1)]:
        vol, se = cube_neighborhood_mc(p, d, eps, 400000, stream(18, p, d))
        assert abs(vol - steiner_volume(p, d, eps)) <= 3 * se
    # the eps-neighborhood of a unit square in R^4 over eps^2 tends to pi, the unit-disc area
    assert steiner_volume(2, 4, 1e-4) / 1e-8 == pytest.approx(math.pi, rel=1e-3)


def test_cube_distance():
    x = np.array([[0.5, 0.5, 0.0, 0.0], [2.0, 0.5, 0.0, 0.0], [0.5, 0.5, 3.0, 4.0]])
    assert np.allclose(cube_distance(x, 2), [0.0, 1.0, 5.0])


# --- hitting and level crossings ----------------------------------------------------------


def test_hitting_prob_mc_rejects_a_ball_around_the_root():
    with pytest.raises(ValueError):
        hitting_prob_mc(np.array([0.4, 0, 0, 0, 0]), 0.5, (0.1, 100.0), 10, stream(0))


def test_level_crossings_match_the_exact_moment():
    t, delta, m = 0.5, 0.2, 40000
    hs = sample_heights(0.05, 50.0, m, stream(19))
    counts = level_crossings(spine_levels(hs.heights, delta, stream(20)), m, t, delta)
    vals = hs.weights * counts
    exact = level_crossings_moment(t, delta, 50.0) - level_crossings_moment(t, delta, 0.05)
    assert abs(vals.mean() - exact) <= 3 * vals.std(ddof=1) / math.sqrt(m)
    assert level_crossings_moment(t, delta) == 0.5 / delta
