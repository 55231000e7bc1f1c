"""Kernel energies I_f and discrete capacities Cap_f = 1 / min over probability nu of nu^T F nu."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

from ..snake import PointCloud, WeightedPointMeasure


@dataclass(frozen=True)
class Kernel:
    """Decreasing kernel on (0, inf): ``power`` r^{-beta} or ``log-power`` log(1 + 1/r)^beta."""

    family: str
    beta: float

    def __post_init__(self):
        if self.family not in ("power", "log-power"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(divide="ignore"):
            if self.family == "power":
                return r ** -self.beta
            return np.log1p(1.0 / r) ** self.beta

    @property
    def name(self) -> str:
        return f"{self.family}:{self.beta:g}"

    def is_decreasing(self, grid=None) -> bool:
        grid = np.geomspace(1e-6, 1e6, 200) if grid is None else np.asarray(grid)
        v = self(grid)
        return bool(np.all(v >= 0) and np.all(np.diff(v) <= 0))


def median_nn(points: np.ndarray) -> float:
    """Median nearest-neighbor distance; raises on coincident points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 2:
        raise ValueError("need two points for a nearest-neighbor distance")
    nn = cKDTree(pts).query(pts, k=2)[0][:, 1]
    if np.any(nn == 0):
        raise ValueError("coincident points: deduplicate first")
    return float(np.median(nn))


def kernel_matrix(points, kernel: Kernel, r_cell: float | None = None) -> np.ndarray:
    """F_ij = f(|x_i - x_j|) with the diagonal set to f(r_cell) (default: median NN distance)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[0]
    if n == 0:
        raise ValueError("support is empty")
    if r_cell is None:
        if n == 1:
            raise ValueError("r_cell is required for a single point")
        r_cell = median_nn(pts)
    if n > 1 and np.any(pdist(pts) == 0):
        raise ValueError("coincident points: deduplicate first")
    F = kernel(cdist(pts, pts))
    np.fill_diagonal(F, kernel(r_cell))
    if not np.all(np.isfinite(F)):
        raise ValueError("non-finite kernel values")
    return F


def f_energy(mu: WeightedPointMeasure, kernel: Kernel, r_cell: float | None = None) -> float:
    """sum_ij w_i w_j f(|x_i - x_j|) with the f(r_cell) diagonal."""
    if mu.size == 0:
        return 0.0
    F = kernel_matrix(mu.points, kernel, r_cell)
    return float(mu.weights @ F @ mu.weights)


@dataclass(frozen=True)
class CapacityResult:
    cap: float
    weights: np.ndarray
    value: float        # nu^T F nu at the returned nu
    gap: float          # Frank-Wolfe duality gap at the returned nu
    iterations: int
    r_cell: float
    history: np.ndarray = field(repr=False)  # value after every iteration


def capacity(support: PointCloud, kernel: Kernel, tol: float = 1e-6, max_iters: int = 100000,
             r_cell: float | None = None) -> CapacityResult:
    """Minimize nu^T F nu over the probability simplex by Frank-Wolfe with away steps.

    Every step moves toward the vertex minimizing the gradient 2 F nu or away
    from the support vertex maximizing it, with exact line search, so the
    objective never increases.  Stops when the gap 2 (nu^T F nu - min_k (F nu)_k)
    is at most tol times the objective.
    """
    pts = support.points
    n = pts.shape[0]
    if n == 0:
        raise ValueError("support is empty")
    if r_cell is None:
        r_cell = median_nn(pts) if n > 1 else math.nan
    if n == 1:
        if not math.isfinite(r_cell):
            raise ValueError("r_cell is required for a single point")
        v = float(kernel(r_cell))
        return CapacityResult(1.0 / v, np.ones(1), v, 0.0, 0, r_cell, np.array([v]))
    F = kernel_matrix(pts, kernel, r_cell)
    diag = np.diag(F).copy()
    nu = np.full(n, 1.0 / n)
    g = F @ nu
    q = float(nu @ g)
    hist = []
    it = 0
    gap = 2.0 * (q - g.min())
    while gap > tol * q and it < max_iters:
        it += 1
        k = int(np.argmin(g))
        supp = np.flatnonzero(nu > 0)
        a = int(supp[np.argmax(g[supp])])
        if q - g[k] >= g[a] - q or nu[a] >= 1.0:
            # toward vertex k: nu + s (e_k - nu), s in [0, 1]
            num, den = q - g[k], q - 2.0 * g[k] + diag[k]
            s = min(1.0, num / den) if den > 0 else 1.0
            nu *= 1.0 - s
            nu[k] += s
            g = (1.0 - s) * g + s * F[:, k]
        else:
            # away from vertex a: nu + s (nu - e_a), s in [0, nu_a / (1 - nu_a)]
            num, den = g[a] - q, q - 2.0 * g[a] + diag[a]
            s_max = nu[a] / (1.0 - nu[a])
            s = min(s_max, num / den) if den > 0 else s_max
            nu *= 1.0 + s
            nu[a] -= s
            if s == s_max:
                nu[a] = 0.0
            g = (1.0 + s) * g - s * F[:, a]
        np.maximum(nu, 0.0, out=nu)
        nu /= nu.sum()
        q = float(nu @ g)
        hist.append(q)
        gap = 2.0 * (q - g.min())
    return CapacityResult(1.0 / q, nu, q, gap, it, float(r_cell), np.array(hist))


@dataclass(frozen=True)
class EquivalenceRow:
    kernel: str
    cap1: float
    cap2: float
    ratio: float


@dataclass(frozen=True)
class EquivalenceReport:
    rows: list
    spread: float   # max ratio / min ratio across the kernel family


def capacity_equivalence_report(cloud1: PointCloud, cloud2: PointCloud, kernels, tol: float = 1e-4,
                                max_iters: int = 100000) -> EquivalenceReport:
    """Cap_f(cloud1) / Cap_f(cloud2) for every kernel, and the spread of the ratios."""
    rows = []
    for k in kernels:
        c1 = capacity(cloud1, k, tol, max_iters).cap
        c2 = capacity(cloud2, k, tol, max_iters).cap
        rows.append(EquivalenceRow(k.name, c1, c2, c1 / c2))
    ratios = np.array([r.ratio for r in rows])
    return EquivalenceReport(rows, float(ratios.max() / ratios.min()))
