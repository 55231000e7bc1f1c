"""Discrete Brownian snake built on a lifetime path.

The lifetime Dyck path is the contour of a plane tree.  Every up-step creates
a node whose spatial position is its parent's position plus a fresh Gaussian
increment with per-coordinate variance ``sqrt(ds)`` (the lifetime increment);
a down-step returns to the parent node.  Tips are positions of the current
node, so the tip covariance of two contour times equals the minimum of the
lifetime between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .excursion import ITO_DENSITY, LifetimePath, condition_height, height_mass


@dataclass(frozen=True)
class WeightedPointMeasure:
    """Finite atomic measure on R^d."""

    points: np.ndarray
    weights: np.ndarray
    labels: np.ndarray | None = None  # optional node ids for merging coincident atoms

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a (k, d) array")
        if w.shape != (pts.shape[0],):
            raise ValueError("one weight per atom required")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    def mass_in(self, indicator) -> float:
        """Mass of the set given by a vectorized indicator on points."""
        if self.size == 0:
            return 0.0
        return math.fsum(self.weights[np.asarray(indicator(self.points), dtype=bool)].tolist())

    def merged(self) -> "WeightedPointMeasure":
        """Merge atoms sharing a label (same tree node), summing weights."""
        if self.labels is None or self.size == 0:
            return self
        uniq, first, inv = np.unique(self.labels, return_index=True, return_inverse=True)
        w = np.bincount(inv, weights=self.weights, minlength=uniq.size)
        return WeightedPointMeasure(self.points[first], w, uniq)

    @classmethod
    def empty(cls, d: int) -> "WeightedPointMeasure":
        return cls(np.zeros((0, d)), np.zeros(0))

    @classmethod
    def dirac(cls, x, mass: float = 1.0) -> "WeightedPointMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return cls(x[None, :], np.array([float(mass)]))


@dataclass(frozen=True)
class PointCloud:
    """Finite set of points with a provenance string."""

    points: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a (k, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


# --- tree structure of a lattice path --------------------------------------------


def tree_structure(heights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Node index visited at every contour time, and the arrival time of each node.

    Node 0 is the root; node k >= 1 is created by the k-th up-step.  A contour
    time at level h belongs to the most recent node that arrived at level h,
    which is the stack-pop rule.  Works for concatenations of excursions
    (forests) as well: every return to level 0 is the root.
    """
    h = np.asarray(heights, dtype=np.int64)
    steps = np.diff(h)
    up = steps > 0
    n_nodes = int(up.sum()) + 1
    arrival_time = np.concatenate(([0], np.flatnonzero(up) + 1))
    ids = np.full(h.size, -1, dtype=np.int64)
    ids[arrival_time[1:]] = np.arange(1, n_nodes)
    order = np.lexsort((np.arange(h.size), h))
    offset = h[order] * (n_nodes + 1)
    vals = np.where(ids[order] >= 0, ids[order], -1) + offset
    np.maximum.accumulate(vals, out=vals)
    node_sorted = vals - offset
    node_sorted[h[order] == 0] = 0
    node_of = np.empty(h.size, dtype=np.int64)
    node_of[order] = node_sorted
    return node_of, arrival_time


def node_positions(heights: np.ndarray, node_of: np.ndarray, arrival_time: np.ndarray,
                   increments: np.ndarray, root: np.ndarray) -> np.ndarray:
    """Positions of all tree nodes from their pushed increments.

    The contour walk adds the increment of a node when entering it and removes
    it when leaving; positions are read at arrival times.
    """
    h = np.asarray(heights)
    steps = np.diff(h)
    d = increments.shape[1]
    moves = np.empty((steps.size, d))
    up = steps > 0
    moves[up] = increments
    down = ~up
    moves[down] = -increments[node_of[:-1][down] - 1]
    walk = np.cumsum(moves, axis=0)
    pos = np.empty((arrival_time.size, d))
    pos[0] = root
    pos[1:] = root + walk[arrival_time[1:] - 1]
    return pos


@dataclass(frozen=True)
class SnakeRealization:
    """Tips of the discrete snake along the contour plus the pushed increments."""

    lifetime: LifetimePath
    root: np.ndarray
    increments: np.ndarray
    tips: np.ndarray = field(repr=False)
    node_of: np.ndarray = field(repr=False)
    spatial_scale: float = 1.0

    @property
    def dimension(self) -> int:
        return self.tips.shape[1]

    @property
    def contour_weights(self) -> np.ndarray:
        """Contour time carried by each of the 2n left endpoints; sums to the duration exactly."""
        m = self.lifetime.step_count
        grid = self.lifetime.duration * (np.arange(m + 1) / m)
        return np.diff(grid)


def _build(lifetime: LifetimePath, root: np.ndarray, increments: np.ndarray, scale: float = 1.0):
    node_of, arrival = tree_structure(lifetime.heights)
    pos = node_positions(lifetime.heights, node_of, arrival, increments, root)
    tips = pos[node_of]
    tips[0] = root
    tips[-1] = root
    return SnakeRealization(lifetime, root, increments, tips, node_of, scale)


def run_snake(lifetime: LifetimePath, x0, d: int, rng: np.random.Generator) -> SnakeRealization:
    """Run the snake over ``lifetime`` started from the trivial path at ``x0``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    root = np.broadcast_to(np.asarray(x0, dtype=np.float64), (d,)).copy()
    sd = lifetime.contour_step ** 0.25  # variance sqrt(ds) per coordinate
    g = rng.standard_normal((lifetime.n, d)) * sd
    return _build(lifetime, root, g)


def replay_tips(lifetime: LifetimePath, root, increments: np.ndarray) -> np.ndarray:
    """Rebuild the tip trajectory from the lifetime and the stored increments."""
    root = np.asarray(root, dtype=np.float64)
    return _build(lifetime, root, increments).tips


def range_cloud(s: SnakeRealization, dedup: bool = False, provenance: str = "") -> PointCloud:
    """Tips as a point cloud; with ``dedup`` one point per tree node."""
    if dedup:
        _, first = np.unique(s.node_of, return_index=True)
        return PointCloud(s.tips[np.sort(first)], provenance)
    return PointCloud(s.tips, provenance)


def occupation(s: SnakeRealization, t_lo: float = 0.0, t_hi: float = math.inf) -> WeightedPointMeasure:
    """Contour-time occupation measure restricted to lifetimes in [t_lo, t_hi]."""
    if not 0 <= t_lo <= t_hi:
        raise ValueError("need 0 <= t_lo <= t_hi")
    z = s.lifetime.values[:-1]
    keep = (z >= t_lo) & (z <= t_hi)
    idx = np.flatnonzero(keep)
    return WeightedPointMeasure(s.tips[idx], s.contour_weights[idx], s.node_of[idx])


def y_slice(s: SnakeRealization, t: float, delta: float | None = None) -> WeightedPointMeasure:
    """Band estimator of the level-t measure: atoms with lifetime in [t, t+delta), weight ds/delta."""
    if t <= 0:
        raise ValueError("t must be positive")
    ds = s.lifetime.contour_step
    if delta is None:
        delta = ds ** 0.25
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = s.lifetime.values[:-1]
    idx = np.flatnonzero((z >= t) & (z < t + delta))
    return WeightedPointMeasure(s.tips[idx], np.full(idx.size, ds / delta), s.node_of[idx])


def ise_transform(s: SnakeRealization) -> SnakeRealization:
    """Scale space by sqrt(2) about the origin (ISE normalization); duration must be 1."""
    if s.lifetime.duration != 1.0:
        raise ValueError("ISE transform needs a duration-1 snake")
    c = math.sqrt(2.0)
    return replace(s, root=s.root * c, increments=s.increments * c, tips=s.tips * c,
                   spatial_scale=s.spatial_scale * c)


def scaling_transform(s: SnakeRealization, lam: float) -> SnakeRealization:
    """The map W_s(t) -> W_{lam^4 s}(lam^2 t) / lam.

    Contour time is divided by lam^4, lifetimes by lam^2 and space by lam, which
    keeps the tip variance equal to the lifetime.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    life = LifetimePath(s.lifetime.heights, s.lifetime.duration / lam ** 4)
    return replace(s, lifetime=life, root=s.root / lam, increments=s.increments / lam,
                   tips=s.tips / lam, spatial_scale=s.spatial_scale / lam)


# --- super-Brownian motion as a Poisson ensemble ----------------------------------


@dataclass(frozen=True)
class SBMEnsemble:
    """Snakes with sup lifetime above t_floor, Poisson in number."""

    snakes: list
    t_floor: float
    expected_count: float
    excluded_mass: float  # intensity of excursions above t_floor lost to the duration window


def sample_sbm(nu: WeightedPointMeasure, t_floor: float, r_bounds: tuple[float, float],
               rng: np.random.Generator, n: int = 2000, max_tries: int = 100000) -> SBMEnsemble:
    """Excursions of the Poisson measure with intensity nu(dx) N_x that survive past t_floor."""
    if nu.size == 0 or nu.total_mass <= 0:
        raise ValueError("initial measure is empty")
    if t_floor <= 0:
        raise ValueError("t_floor must be positive")
    mass = nu.total_mass
    lam = mass / (2.0 * t_floor)
    k = int(rng.poisson(lam))
    probs = nu.weights / nu.weights.sum()
    roots = rng.choice(nu.size, size=k, p=probs) if k else np.zeros(0, dtype=int)
    snakes = []
    for j in roots:
        hc = condition_height(t_floor, r_bounds[0], r_bounds[1], rng, n=n, max_tries=max_tries)
        snakes.append(run_snake(hc.path, nu.points[j], nu.dimension, rng))
    inside = height_mass(t_floor, r_bounds[0], r_bounds[1])
    return SBMEnsemble(snakes, t_floor, lam, mass * (1.0 / (2.0 * t_floor) - inside))


def sbm_range_cloud(snakes, t_floor: float, d: int | None = None) -> PointCloud:
    """Union of tips with lifetime >= t_floor over the ensemble."""
    parts = [s.tips[s.lifetime.values >= t_floor] for s in snakes]
    if not parts:
        if d is None:
            raise ValueError("dimension needed for an empty ensemble")
        return PointCloud(np.zeros((0, d)))
    return PointCloud(np.concatenate(parts, axis=0))


def sbm_slice(snakes, t: float, delta: float | None = None) -> WeightedPointMeasure:
    """Band estimate of X_t as the sum of the level-t slices of all snakes."""
    parts = [y_slice(s, t, delta) for s in snakes]
    parts = [p for p in parts if p.size]
    if not parts:
        d = snakes[0].dimension if snakes else 1
        return WeightedPointMeasure.empty(d)
    return WeightedPointMeasure(np.concatenate([p.points for p in parts]),
                                np.concatenate([p.weights for p in parts]))


# --- ensembles on a common contour step ---------------------------------------------


@dataclass(frozen=True)
class Forest:
    """Many excursions sharing one root, concatenated along the contour.

    ``tips`` holds the 2n_j left-endpoint tips of every excursion back to back;
    ``offsets`` delimits them and ``weights`` carries contour time per tip.
    """

    tips: np.ndarray
    lifetimes: np.ndarray
    weights: np.ndarray
    offsets: np.ndarray
    nodes: np.ndarray | None = field(default=None, repr=False)        # node positions, node 0 = root
    parents: np.ndarray | None = field(default=None, repr=False)      # parent node of nodes 1..
    node_owner: np.ndarray | None = field(default=None, repr=False)   # excursion index of nodes 1..
    edge_lifetime: np.ndarray | None = field(default=None, repr=False)  # lifetime length of edges to 1..

    def reduce(self, values: np.ndarray) -> np.ndarray:
        """Per-excursion sums of ``values`` (one per tip)."""
        return np.add.reduceat(values, self.offsets[:-1]) if values.size else np.zeros(0)


def forest_from_heights(heights_list, durations, x0, d: int, rng: np.random.Generator) -> Forest:
    """Snake over a concatenation of lattice excursions with individual durations."""
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), (d,))
    lengths = np.array([h.size - 1 for h in heights_list], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(lengths)))
    heights = np.zeros(offsets[-1] + 1, dtype=np.int64)
    for j, h in enumerate(heights_list):
        heights[offsets[j]:offsets[j + 1] + 1] = h
    node_of, arrival = tree_structure(heights)
    # each up-step belongs to the excursion containing it
    ds = np.asarray(durations, dtype=np.float64) / lengths
    up_times = arrival[1:] - 1
    owner = np.searchsorted(offsets, up_times, side="right") - 1
    g = rng.standard_normal((up_times.size, d)) * (ds[owner] ** 0.25)[:, None]
    pos = node_positions(heights, node_of, arrival, g, x0)
    tips = pos[node_of[:-1]]
    step_owner = np.repeat(np.arange(lengths.size), lengths)
    lifetimes = np.sqrt(ds[step_owner]) * heights[:-1]
    weights = ds[step_owner]
    parents = node_of[up_times]
    return Forest(tips, lifetimes, weights, offsets, pos, parents, owner, np.sqrt(ds[owner]))


def path_continuation(spine_points: np.ndarray, ds: float, rng: np.random.Generator,
                      max_steps: int = 10 ** 6) -> tuple[np.ndarray, np.ndarray, bool]:
    """Snake started from a given path, run until its lifetime hits 0.

    ``spine_points[k]`` is the initial path at lifetime ``k*sqrt(ds)``; the
    lifetime is a lattice walk from the top of the spine killed at 0, and
    descending below the current level reuses the spine.  Returns the tips at
    the left endpoints, the contour weight ds for each, and whether the walk
    was cut at ``max_steps``.
    """
    spine_points = np.asarray(spine_points, dtype=np.float64)
    k0 = spine_points.shape[0] - 1
    d = spine_points.shape[1]
    if k0 == 0:
        return np.zeros((0, d)), np.zeros(0), False
    heights = [np.array([k0])]
    total = 0
    cur = k0
    truncated = False
    block = 4096
    while cur > 0:
        steps = rng.choice(np.array([-1, 1]), size=block)
        walk = cur + np.cumsum(steps)
        hit = np.flatnonzero(walk == 0)
        if hit.size:
            walk = walk[: hit[0] + 1]
        heights.append(walk)
        total += walk.size
        cur = int(walk[-1])
        if total >= max_steps and cur > 0:
            truncated = True
            break
    h = np.concatenate(heights).astype(np.int64)
    # tree on top of the spine: prepend the spine as an initial climb
    full = np.concatenate((np.arange(k0), h))
    node_of, arrival = tree_structure(full)
    up_times = arrival[1:] - 1
    g = rng.standard_normal((up_times.size, d)) * ds ** 0.25
    spine_nodes = up_times < k0
    g[spine_nodes] = np.diff(spine_points, axis=0)
    pos = node_positions(full, node_of, arrival, g, spine_points[0])
    tips = pos[node_of[k0:-1]]
    return tips, np.full(tips.shape[0], ds), truncated


# Re-exported for modules that report excursion-measure constants.
__all__ = [
    "ITO_DENSITY", "WeightedPointMeasure", "PointCloud", "SnakeRealization", "run_snake",
    "replay_tips", "range_cloud", "occupation", "y_slice", "ise_transform", "scaling_transform",
    "sample_sbm", "sbm_range_cloud", "sbm_slice", "SBMEnsemble", "Forest", "forest_from_heights",
    "path_continuation", "tree_structure", "node_positions",
]
