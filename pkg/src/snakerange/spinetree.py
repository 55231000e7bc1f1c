"""Continuum snake trees built from their spine decomposition.

Under N_x conditioned on the height H of the genealogical tree, the tree is a
spine of lifetime length H carrying a Brownian path, with subtrees grafted at
the spine levels.  At a level where the spine still has m to go, grafts with
height in (a, m) arrive at rate 2 (1/a - 1/m) per unit lifetime (both sides of
the spine), their heights have density proportional to h^{-2}, and each graft
is again such a tree rooted at the spine position.  Grafts too small to matter
are skipped, so the resolution can adapt to the functional of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .snake import WeightedPointMeasure


def height_mass(h_lo: float, h_hi: float = math.inf) -> float:
    """N-mass of {h_lo <= H <= h_hi}."""
    return 0.5 / h_lo - (0.0 if math.isinf(h_hi) else 0.5 / h_hi)


@dataclass(frozen=True)
class HeightSample:
    heights: np.ndarray
    weights: np.ndarray  # mean(weights * f(H)) estimates N[f(H); h_lo <= H <= h_hi]
    h_lo: float
    h_hi: float


def sample_heights(h_lo: float, h_hi: float, size: int, rng: np.random.Generator) -> HeightSample:
    """Heights from a proposal with density proportional to h^{-3/2} on [h_lo, h_hi].

    The N-density of H is 1/(2h^2); the heavier proposal tail puts more
    samples on tall trees, which carry most of the hitting mass.
    """
    if not 0 < h_lo < h_hi < math.inf:
        raise ValueError("need 0 < h_lo < h_hi < inf")
    a, b = h_lo ** -0.5, h_hi ** -0.5
    H = (a - rng.random(size) * (a - b)) ** -2.0
    np.clip(H, h_lo, h_hi, out=H)
    # proposal density 0.5 h^{-3/2} / (a - b); weight = N-density / proposal density
    w = (a - b) * H ** -0.5
    return HeightSample(H, w, h_lo, h_hi)


def _grafts(m: np.ndarray, dt: np.ndarray, cutoff: np.ndarray, rng: np.random.Generator):
    """Grafts along spine segments of length dt ending with m - dt to go.

    Returns (segment index, fraction of the segment, graft height).  Thinning
    from the rate 2/cutoff keeps the exact rate 2 (1/cutoff - 1/x).
    """
    k = rng.poisson(2.0 * dt / cutoff)
    if not k.any():
        return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0)
    seg = np.repeat(np.arange(m.size), k)
    frac = rng.random(seg.size)
    x = m[seg] - frac * dt[seg]  # remaining height at the graft level
    c = cutoff[seg]
    keep = (x > c) & (rng.random(seg.size) * x < x - c)
    seg, frac, x, c = seg[keep], frac[keep], x[keep], c[keep]
    inv = 1.0 / x + rng.random(seg.size) * (1.0 / c - 1.0 / x)
    return seg, frac, 1.0 / inv


@dataclass(frozen=True)
class SpineLevels:
    tree: np.ndarray    # tree index of each spine
    start: np.ndarray   # lifetime level where the spine leaves its parent
    height: np.ndarray  # lifetime length of the spine


def spine_levels(H: np.ndarray, cutoff: float, rng: np.random.Generator,
                 max_spines: int = 10 ** 7) -> SpineLevels:
    """Genealogy only: every spine of height >= cutoff in trees of heights H."""
    H = np.asarray(H, dtype=np.float64)
    tree_out, start_out, height_out = [], [], []
    tree = np.arange(H.size)
    start = np.zeros(H.size)
    height = H.copy()
    total = 0
    while tree.size:
        tree_out.append(tree)
        start_out.append(start)
        height_out.append(height)
        total += tree.size
        if total > max_spines:
            raise RuntimeError("spine count exceeds max_spines")
        seg, frac, h = _grafts(height, height, np.full(height.size, cutoff), rng)
        tree, start, height = tree[seg], start[seg] + frac * height[seg], h
    return SpineLevels(np.concatenate(tree_out), np.concatenate(start_out), np.concatenate(height_out))


def level_crossings(levels: SpineLevels, n_trees: int, t: float, delta: float) -> np.ndarray:
    """Per tree, the number of level-t points with descendants at level t + delta.

    Each level-t point lies on exactly one spine and grafts above it stay below
    the spine top, so the point qualifies iff its spine reaches t + delta.
    """
    ok = (levels.start <= t) & (levels.start + levels.height >= t + delta)
    return np.bincount(levels.tree[ok], minlength=n_trees)


def level_crossings_moment(t: float, delta: float, h_hi: float = math.inf) -> float:
    """Exact N[#level-t points reaching t + delta ; H <= h_hi].

    Given the local time L at level t, subtrees above t are Poisson with mean
    L times the height tail 1/(2h); L has N[L exp(-lam L)] = (1 + 2 lam t)^{-2}.
    """
    if math.isinf(h_hi):
        return 0.5 / delta
    g = h_hi - t
    if g < delta:
        return 0.0
    return (0.5 / delta - 0.5 / g) * (g / h_hi) ** 2


@dataclass(frozen=True)
class SpineHitRun:
    hit: np.ndarray   # per tree
    steps: int
    work: int         # spine-steps taken


def spine_hits(H: np.ndarray, y, eps: float, rng: np.random.Generator, x0=None,
               eta_step: float = 0.02, eta_graft: float = 0.05, touch: float = 1e-3,
               max_particles: int = 10 ** 7) -> SpineHitRun:
    """Whether each tree (heights H, root x0) meets the closed ball B(y, eps).

    Spines advance together with steps dt = eta_step * dist^2 (dist to the
    sphere).  Between samples the spine is a Brownian bridge, which crosses the
    sphere with the tangent half-space probability exp(-2ab/dt).  Grafts of
    height below eta_graft * dist^2 cannot reach the ball in practice and are
    skipped.  A spine within touch * eps of the sphere counts as a hit.
    """
    y = np.asarray(y, dtype=np.float64)
    d = y.size
    H = np.asarray(H, dtype=np.float64)
    n = H.size
    hit = np.zeros(n, dtype=bool)
    root = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64)
    if np.linalg.norm(root - y) <= eps:
        return SpineHitRun(np.ones(n, dtype=bool), 0, 0)
    pos = np.tile(root, (n, 1))
    m = H.copy()
    tree = np.arange(n)
    floor = touch * eps
    steps = work = 0
    while tree.size:
        live = (m > 0) & ~hit[tree]
        pos, m, tree = pos[live], m[live], tree[live]
        if not tree.size:
            break
        steps += 1
        work += tree.size
        k = tree.size
        dist = np.linalg.norm(pos - y, axis=1) - eps
        inside = dist <= floor  # a graft rooted on or in the ball
        if inside.any():
            hit[tree[inside]] = True
            keep = ~inside
            pos, m, tree, dist = pos[keep], m[keep], tree[keep], dist[keep]
            k = tree.size
        dt = np.minimum(eta_step * dist * dist, m)
        new = pos + np.sqrt(dt)[:, None] * rng.standard_normal((k, d))
        nd = np.linalg.norm(new - y, axis=1) - eps
        cross = nd <= floor
        far = ~cross
        p = np.exp(-2.0 * dist[far] * nd[far] / dt[far])
        cross[far] = rng.random(p.size) < p
        hit[tree[cross]] = True
        cutoff = eta_graft * np.minimum(dist, np.maximum(nd, floor)) ** 2
        seg, frac, h = _grafts(m, dt, cutoff, rng)
        live = ~cross[seg]
        seg, frac, h = seg[live], frac[live], h[live]
        # graft roots: Brownian bridge between the two samples of the spine
        a, b = pos[seg], new[seg]
        sd = np.sqrt(frac * (1.0 - frac) * dt[seg])
        gp = a + frac[:, None] * (b - a) + sd[:, None] * rng.standard_normal((seg.size, d))
        pos = np.concatenate((new, gp))
        m = np.concatenate((m - dt, h))
        tree = np.concatenate((tree, tree[seg]))
        if tree.size > max_particles:
            raise RuntimeError("particle count exceeds max_particles")
    return SpineHitRun(hit, steps, work)


# --- reduced tree of the level-t population ------------------------------------------


def reduced_tree_leaves(x0, t: float, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Positions at level t of the ancestors, at level t - delta, of the level-t population
    of one excursion conditioned on reaching t.

    The lineages with descendants at level t form a binary tree: a lineage at
    level s splits at rate 1/(t - s), so the gap to t of its next split is
    (t - s) U with U uniform.  A lineage whose next split falls within delta of t
    stops branching and is carried by Brownian motion up to level t.
    """
    if not 0 < delta < t:
        raise ValueError("need 0 < delta < t")
    x0 = np.asarray(x0, dtype=np.float64)
    d = x0.size
    s = np.zeros(1)
    pos = x0[None, :].copy()
    out = []
    while s.size:
        gap = (t - s) * rng.random(s.size)
        end = gap <= delta
        out.append(pos[end] + np.sqrt(t - s[end])[:, None] * rng.standard_normal((int(end.sum()), d)))
        go = ~end
        split = t - gap[go]
        p = pos[go] + np.sqrt(split - s[go])[:, None] * rng.standard_normal((int(go.sum()), d))
        s = np.repeat(split, 2)
        pos = np.repeat(p, 2, axis=0)
    return np.concatenate(out)


def reduced_tree_mean_size(t: float, delta: float) -> float:
    """Mean number of reduced-tree leaves of one excursion reaching t: t / delta."""
    return t / delta


def sample_sbm_support(points, masses, t: float, delta: float, rng: np.random.Generator):
    """Point set resolving supp X_t at scale sqrt(delta) for X_0 = sum masses_i delta_{points_i}.

    Excursions from x_i reaching level t are Poisson with mean masses_i / (2t).
    Returns the leaves and the number of such excursions.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    masses = np.asarray(masses, dtype=np.float64)
    counts = rng.poisson(masses / (2.0 * t))
    parts = [reduced_tree_leaves(points[i], t, delta, rng)
             for i in np.repeat(np.arange(points.shape[0]), counts)]
    leaves = np.concatenate(parts) if parts else np.zeros((0, points.shape[1]))
    return leaves, int(counts.sum())


def sample_sbm_slice(points, masses, t: float, delta: float, rng: np.random.Generator):
    """Atomic approximation of X_t at scale sqrt(delta), with the number of excursions.

    Each reduced-tree leaf stands for the level-t mass descending from one
    ancestor at level t - delta.  Given that it reaches t, that mass is the
    local time at height delta of an excursion conditioned to reach delta,
    which is exponential with mean 2 delta, independently across leaves.
    """
    leaves, k = sample_sbm_support(points, masses, t, delta, rng)
    return WeightedPointMeasure(leaves, rng.exponential(2.0 * delta, leaves.shape[0])), k
