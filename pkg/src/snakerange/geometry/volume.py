"""Volumes of eps-neighborhoods of point clouds and their scaling with eps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..moments import Ball, ball_volume
from ..snake import PointCloud
from .spatial import SpatialIndex


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random((m, self.d))


Region = Ball | Box


@dataclass(frozen=True)
class ScalingLaw:
    """phi_d(eps) normalizing range volumes, and the support exponent d - 2."""

    d: int

    def __post_init__(self):
        if self.d < 4:
            raise ValueError("range-volume scaling needs d >= 4")

    def phi(self, eps):
        eps = np.asarray(eps, dtype=np.float64)
        if np.any(eps <= 0) or (self.d == 4 and np.any(eps >= 1)):
            raise ValueError("need 0 < eps (and eps < 1 when d = 4)")
        return np.log(1.0 / eps) if self.d == 4 else eps ** (4.0 - self.d)

    @property
    def support_exponent(self) -> int:
        return self.d - 2


def _distances(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    if points.shape[0] == 0:
        return np.full(queries.shape[0], np.inf)
    return cKDTree(points).query(queries)[0]


def epsilon_volume(cloud: PointCloud, A: Region, eps: float, M: int, rng: np.random.Generator,
                   backend: str = "kdtree") -> tuple[float, float]:
    """Hit-or-miss estimate of |cloud^eps intersected with A| and its binomial stderr."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if M < 1:
        raise ValueError("M must be >= 1")
    if len(cloud) == 0:
        return 0.0, 0.0
    q = A.sample(M, rng)
    if backend == "kdtree":
        hit = _distances(cloud.points, q) <= eps
    elif backend == "grid":
        hit = SpatialIndex(cloud.points, eps).any_within(q, eps)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    p = float(hit.mean())
    return A.volume * p, A.volume * math.sqrt(p * (1.0 - p) / M)


def epsilon_volumes(cloud: PointCloud, A: Region, eps_list, M: int, rng: np.random.Generator):
    """Hit-or-miss volumes for several eps from one set of sample points (monotone in eps)."""
    eps = np.asarray(eps_list, dtype=np.float64)
    if len(cloud) == 0:
        return np.zeros(eps.size), np.zeros(eps.size)
    dist = _distances(cloud.points, A.sample(M, rng))
    p = (dist[:, None] <= eps[None, :]).mean(axis=0)
    return A.volume * p, A.volume * np.sqrt(p * (1.0 - p) / M)


def coverage_volume(cloud: PointCloud, A: Region, eps: float, M: int,
                    rng: np.random.Generator) -> tuple[float, float]:
    """Union-of-balls estimate of |cloud^eps intersected with A|.

    A point is drawn uniformly from a uniformly chosen ball B(x_i, eps) and
    weighted by n |B_eps| / (number of balls containing it), which is unbiased
    for the union volume; restricting to A multiplies by the indicator.  Its
    relative error does not degrade when the union is a small part of A.
    """
    pts = cloud.points
    n, d = pts.shape
    if n == 0:
        return 0.0, 0.0
    tree = cKDTree(pts)
    i = rng.integers(n, size=M)
    z = Ball(np.zeros(d), eps).sample(M, rng) + pts[i]
    cover = tree.query_ball_point(z, eps, return_length=True)
    vals = n * ball_volume(d, eps) * A.contains(z) / np.maximum(cover, 1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0


def median_spacing(cloud: PointCloud, rng: np.random.Generator | None = None, sample: int = 20000) -> float:
    """Median nearest-neighbor distance over distinct points (subsampled queries)."""
    pts = np.unique(cloud.points, axis=0)
    if pts.shape[0] < 2:
        return math.inf
    rng = rng or np.random.default_rng(0)
    q = pts if pts.shape[0] <= sample else pts[rng.choice(pts.shape[0], sample, replace=False)]
    return float(np.median(cKDTree(pts).query(q, k=2)[0][:, 1]))


@dataclass(frozen=True)
class CurveRow:
    eps: float
    value: float     # normalized volume (mean over realizations)
    target: float
    ratio: float     # mean of the per-realization ratios
    stderr: float    # of the ratio
    guarded: bool    # True when eps passes the resolution guard


@dataclass(frozen=True)
class DistanceProfile:
    """Distances from M uniform points of A to one cloud, with its resolution."""

    dist: np.ndarray
    region_volume: float
    spacing: float

    def volumes(self, eps) -> np.ndarray:
        return self.region_volume * (self.dist[:, None] <= np.asarray(eps)[None, :]).mean(axis=0)


def distance_profile(cloud: PointCloud, A: Region, M: int, rng: np.random.Generator) -> DistanceProfile:
    return DistanceProfile(_distances(cloud.points, A.sample(M, rng)), A.volume, median_spacing(cloud, rng))


def scaling_rows(profiles, targets, eps_list, law: ScalingLaw, guard_factor: float = 5.0) -> list[CurveRow]:
    """Curve rows from per-realization distance profiles and targets C0 (occupation, 1_A)."""
    eps = np.asarray(eps_list, dtype=np.float64)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be decreasing")
    phi = law.phi(eps)
    vals = np.array([phi * p.volumes(eps) for p in profiles])
    targets = np.asarray(targets, dtype=np.float64)
    guard = guard_factor * max(p.spacing for p in profiles)
    ok = targets > 0
    rows = []
    for k, e in enumerate(eps):
        r = vals[ok, k] / targets[ok]
        se = float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else math.nan
        rows.append(CurveRow(float(e), float(vals[:, k].mean()), float(targets.mean()),
                             float(r.mean()) if r.size else math.nan, se, bool(e >= guard)))
    return rows


def volume_scaling_experiment(clouds, occupations, A: Region, eps_list, law: ScalingLaw, C0: float,
                              M: int, rng: np.random.Generator, spatial_scale: float = 1.0,
                              guard_factor: float = 5.0) -> list[CurveRow]:
    """phi_d(eps) |R^eps intersected with A| against C0 (occupation, 1_A).

    For a cloud scaled by lambda about the origin the target picks up the
    factor lambda^4 (volume scales by lambda^d, eps by lambda and phi_d by
    lambda^{4-d}).  Rows average the per-realization ratios; rows with eps
    below guard_factor times the largest median spacing are flagged.
    """
    profiles = [distance_profile(c, A, M, rng) for c in clouds]
    targets = [C0 * spatial_scale ** 4 * occ.mass_in(A.contains) for occ in occupations]
    return scaling_rows(profiles, targets, eps_list, law, guard_factor)


@dataclass(frozen=True)
class SupportScaling:
    rows: list          # (eps, eps^{2-d} volume, stderr, guarded)
    exponent: float     # fitted slope of log volume against log eps over guarded rows
    exponent_stderr: float


def support_volumes(cloud: PointCloud, A: Region, eps_list, M: int, rng: np.random.Generator) -> np.ndarray:
    return np.array([coverage_volume(cloud, A, float(e), M, rng)[0] for e in eps_list])


def fit_support_exponent(vols, eps_list, d: int, resolution: float, guard_factor: float = 10.0) -> SupportScaling:
    """Average volumes over realizations (rows of ``vols``) and fit the log-log slope over guarded eps."""
    eps = np.asarray(eps_list, dtype=np.float64)
    if np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be decreasing")
    vols = np.atleast_2d(np.asarray(vols, dtype=np.float64))
    mean = vols.mean(axis=0)
    n = vols.shape[0]
    se = vols.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(eps.size)
    guarded = eps >= guard_factor * resolution
    rows = [(float(e), float(m * e ** (2 - d)), float(s * e ** (2 - d)), bool(g))
            for e, m, s, g in zip(eps, mean, se, guarded)]
    use = guarded & (mean > 0)
    if use.sum() < 2:
        return SupportScaling(rows, math.nan, math.nan)
    x, y = np.log(eps[use]), np.log(mean[use])
    if use.sum() == 2:
        return SupportScaling(rows, float((y[1] - y[0]) / (x[1] - x[0])), math.nan)
    coef, cov = np.polyfit(x, y, 1, cov=True)
    return SupportScaling(rows, float(coef[0]), float(math.sqrt(cov[0, 0])))


def support_scaling_experiment(clouds, A: Region, eps_list, d: int, M: int, rng: np.random.Generator,
                               resolution: float, guard_factor: float = 10.0) -> SupportScaling:
    """eps^{2-d} |supp^eps intersected with A| over an ensemble, and the fitted exponent.

    Volumes use the union-of-balls estimator and are averaged over the
    ensemble (empty supports count as zero).  Rows with eps below
    guard_factor * resolution are reported but excluded from the fit.
    """
    vols = [support_volumes(c, A, eps_list, M, rng) for c in clouds]
    return fit_support_exponent(vols, eps_list, d, resolution, guard_factor)
