"""Monte Carlo functionals of snake excursions under the excursion measure N_x.

Durations are drawn from the excursion measure restricted to a window
[r_min, r_max] (density proportional to r^{-3/2}); each excursion is a
uniform Dyck path whose number of steps is chosen so that the contour step is
close to a common value ``ds``.  Excursions are simulated in batches as one
forest.  Estimates are of the N_x-mass of the window; the masses outside the
window are reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .excursion import ITO_DENSITY, dyck_heights, duration_mass, sample_duration
from .moments import Ball, occupation_first_moment, occupation_window_moment
from .snake import Forest, forest_from_heights
from .spinetree import height_mass, sample_heights, spine_hits


def lattice_size(r: np.ndarray, ds: float, n_cap: int) -> np.ndarray:
    """Dyck half-length n with r / (2n) close to ds, clipped to [1, n_cap]."""
    return np.clip(np.rint(np.asarray(r) / (2.0 * ds)), 1, n_cap).astype(np.int64)


def forest_batches(durations: np.ndarray, ds: float, n_cap: int, x0, d: int,
                   rng: np.random.Generator, batch_steps: int = 2_000_000):
    """Yield (first index, Forest) for consecutive batches of excursions."""
    n = lattice_size(durations, ds, n_cap)
    start = 0
    while start < durations.size:
        stop = start
        total = 0
        while stop < durations.size and (stop == start or total + 2 * n[stop] <= batch_steps):
            total += 2 * n[stop]
            stop += 1
        heights = [dyck_heights(int(k), rng) for k in n[start:stop]]
        yield start, forest_from_heights(heights, durations[start:stop], x0, d, rng)
        start = stop


@dataclass(frozen=True)
class WindowEstimate:
    estimate: float        # N-mass of the functional over the duration window
    stderr: float
    window_mass: float     # N-mass of the window itself
    lower_tail: float      # contribution of durations below r_min (exact or bounded)
    upper_tail: float      # contribution of durations above r_max (exact or bounded)
    samples: int


# --- occupation of a ball ---------------------------------------------------------


@dataclass(frozen=True)
class OccupationMC(WindowEstimate):
    window_target: float = math.nan  # exact N-mean of the occupation restricted to the window
    full_target: float = math.nan    # exact N-mean over all durations


def occupation_moment_mc(A: Ball, M: int, rng: np.random.Generator, x0=None, r_min: float = 0.05,
                         r_max: float = 400.0, ds: float = 0.005, n_cap: int = 1 << 16) -> OccupationMC:
    """N_x[int_0^sigma 1_A(tip_s) ds] by simulation over a duration window.

    The parts of the duration range outside the window are computed exactly,
    so ``estimate + lower_tail + upper_tail`` estimates the full moment.
    """
    d = A.d
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64)
    sample = sample_duration(r_min, r_max, rng, size=M)
    vals = np.empty(M)
    for start, forest in forest_batches(sample.durations, ds, n_cap, x0, d, rng):
        inside = A.contains(forest.tips)
        k = forest.offsets.size - 1
        vals[start:start + k] = forest.reduce(np.where(inside, forest.weights, 0.0))
    mass = sample.window_mass
    est = mass * float(np.mean(vals))
    se = mass * float(np.std(vals, ddof=1)) / math.sqrt(M)
    window = occupation_window_moment(x0, A, r_min, r_max)
    lower = occupation_window_moment(x0, A, 0.0, r_min)
    upper = occupation_window_moment(x0, A, r_max, math.inf)
    full = occupation_first_moment(x0, A)
    return OccupationMC(est, se, mass, lower, upper, M, window, full)


# --- hitting a ball -----------------------------------------------------------------


def bridge_hit_probability(a_dist: np.ndarray, b_dist: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Probability that a Brownian bridge between two points outside a ball enters it.

    Uses the tangent half-space: with signed distances a, b to the sphere the
    crossing probability is exp(-2ab/tau); a nonpositive endpoint distance gives 1.
    """
    a = np.asarray(a_dist)
    b = np.asarray(b_dist)
    out = np.ones(np.broadcast(a, b).shape)
    ok = (a > 0) & (b > 0)
    out[ok] = np.exp(-2.0 * a[ok] * b[ok] / np.broadcast_to(tau, out.shape)[ok])
    return out


def hit_probabilities(forest: Forest, y, eps: float, bridge: bool = True) -> np.ndarray:
    """Per-excursion probability that the tree-indexed path enters B(y, eps).

    Node positions are exact samples; between a node and its parent the path
    is a Brownian bridge, independent across edges given the nodes.  With
    ``bridge=False`` only the nodes are tested (a 0/1 indicator).
    """
    k = forest.offsets.size - 1
    dist = np.linalg.norm(forest.nodes - np.asarray(y, dtype=np.float64), axis=1) - eps
    child = dist[1:]
    parent = dist[forest.parents]
    if bridge:
        p = bridge_hit_probability(parent, child, forest.edge_lifetime)
    else:
        p = (child <= 0).astype(np.float64)
    log_miss = np.full(child.size, -np.inf)
    pos = p < 1.0
    log_miss[pos] = np.log1p(-p[pos])
    miss = np.zeros(k)
    np.add.at(miss, forest.node_owner, log_miss)
    if dist[0] <= 0:
        return np.ones(k)
    return -np.expm1(miss)


@dataclass(frozen=True)
class HittingMC(WindowEstimate):
    method: str = "spine"
    lower_tail_estimate: float = math.nan  # simulated contribution just below the window


def hitting_prob_mc(y, eps: float, bounds: tuple[float, float], M: int, rng: np.random.Generator,
                    method: str = "spine", ds: float = 0.01, n_cap: int = 1 << 18,
                    eta_step: float = 0.02, eta_graft: float = 0.05,
                    lower_samples: int | None = None) -> HittingMC:
    """N_0-mass of excursions whose range meets the closed ball B(y, eps).

    ``method="spine"`` samples continuum trees by height with ``bounds`` a
    height window; the mass of taller trees bounds the upper tail, 1/(2 h_max).
    ``method="lattice"`` runs Dyck-path snakes with a common contour step
    ``ds`` over the duration window ``bounds`` and tests tree edges as
    Brownian bridges; its upper tail is at most 2c r_max^{-1/2}.  The lattice
    tree lacks the subtrees shorter than its resolution, so it underestimates
    by an amount that shrinks only like ds^{1/4}.

    In both cases the contribution just below the window (bounds[0]/16 to
    bounds[0]) is simulated and reported, plus three standard errors, as the
    lower tail; anything smaller is neglected.
    """
    y = np.asarray(y, dtype=np.float64)
    d = y.size
    if np.linalg.norm(y) <= eps:
        raise ValueError("need |y| > eps")
    lo, hi = bounds
    x0 = np.zeros(d)

    def run(a, b, m):
        if method == "spine":
            hs = sample_heights(a, b, m, rng)
            hits = spine_hits(hs.heights, y, eps, rng, x0, eta_step, eta_graft).hit
            return hs.weights * hits
        if method == "lattice":
            sample = sample_duration(a, b, rng, size=m)
            vals = np.empty(m)
            for start, forest in forest_batches(sample.durations, ds, n_cap, x0, d, rng):
                probs = hit_probabilities(forest, y, eps, bridge=True)
                vals[start:start + probs.size] = probs
            return sample.window_mass * vals
        raise ValueError(f"unknown method {method!r}")

    vals = run(lo, hi, M)
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1)) / math.sqrt(M)
    m_low = lower_samples if lower_samples is not None else max(M // 4, 100)
    low = run(lo / 16.0, lo, m_low)
    low_est = float(np.mean(low))
    low_bound = low_est + 3.0 * float(np.std(low, ddof=1)) / math.sqrt(m_low)
    if method == "spine":
        window, upper = height_mass(lo, hi), 0.5 / hi
    else:
        window, upper = duration_mass(lo, hi), 2.0 * ITO_DENSITY * hi ** -0.5
    return HittingMC(est, se, window, low_bound, upper, M, method, low_est)


__all__ = [
    "lattice_size", "forest_batches", "WindowEstimate", "OccupationMC", "occupation_moment_mc",
    "bridge_hit_probability", "hit_probabilities", "HittingMC", "hitting_prob_mc",
]
