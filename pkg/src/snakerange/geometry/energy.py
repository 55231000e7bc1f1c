"""Heat-kernel energies S_eps(mu) = sum_ij w_i w_j p(eps^2, x_i - x_j) and their scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..snake import WeightedPointMeasure

# beyond CUTOFF * eps the kernel is below exp(-CUTOFF^2 / 2) of its peak
CUTOFF = 6.0


def _peak(d: int, eps: float) -> float:
    return (2.0 * math.pi * eps * eps) ** (-d / 2.0)


def _row_sums(points: np.ndarray, weights: np.ndarray, rows: np.ndarray, eps: float,
              cutoff: float | None, tree: cKDTree | None, chunk: int) -> np.ndarray:
    """sum_j w_j p(eps^2, x_i - x_j) for every i in rows."""
    d = points.shape[1]
    out = np.zeros(rows.size)
    inv = -0.5 / (eps * eps)
    for a in range(0, rows.size, chunk):
        r = rows[a:a + chunk]
        if cutoff is None:
            diff2 = (np.sum(points[r] ** 2, axis=1)[:, None] + np.sum(points ** 2, axis=1)[None, :]
                     - 2.0 * points[r] @ points.T)
            out[a:a + r.size] = np.exp(inv * np.maximum(diff2, 0.0)) @ weights
        else:
            pairs = cKDTree(points[r]).sparse_distance_matrix(tree, cutoff * eps, output_type="ndarray")
            vals = np.exp(inv * pairs["v"] ** 2) * weights[pairs["j"]]
            out[a:a + r.size] = np.bincount(pairs["i"], weights=vals, minlength=r.size)
    return _peak(d, eps) * out


def s_energy(mu: WeightedPointMeasure, eps: float, cutoff: float | None = None,
             chunk: int = 2048) -> float:
    """S_eps(mu) by the full double sum.

    With ``cutoff`` set, pairs farther apart than cutoff * eps are dropped
    (relative error below exp(-cutoff^2 / 2)); otherwise every pair is summed.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if mu.size == 0:
        return 0.0
    tree = cKDTree(mu.points) if cutoff is not None else None
    sums = _row_sums(mu.points, mu.weights, np.arange(mu.size), eps, cutoff, tree, chunk)
    return math.fsum((mu.weights * sums).tolist())


def s_energy_sampled(mu: WeightedPointMeasure, eps: float, rows: int, rng: np.random.Generator,
                     cutoff: float = CUTOFF, chunk: int = 256) -> tuple[float, float]:
    """Unbiased estimate of S_eps(mu) from rows drawn proportionally to mass, with stderr.

    S = m * E[sum_j w_j p(eps^2, X - x_j)] with X distributed as mu / m.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if mu.size == 0:
        return 0.0, 0.0
    m = mu.total_mass
    idx = rng.choice(mu.size, size=rows, p=mu.weights / mu.weights.sum())
    vals = m * _row_sums(mu.points, mu.weights, idx, eps, cutoff, cKDTree(mu.points), chunk)
    se = float(vals.std(ddof=1) / math.sqrt(rows)) if rows > 1 else math.nan
    return float(vals.mean()), se


def energy_constant(d: int, mode: str) -> tuple[int, float]:
    """(gamma, constant): eps^{d-gamma} (2 pi)^{d/2} S_eps tends to constant times the mass.

    Slices: gamma = 2, constant 4/(d-2).  Occupation: gamma = 4, constant 16/((d-2)(d-4)).
    """
    if mode == "slice":
        if d < 3:
            raise ValueError("slice energies need d >= 3")
        return 2, 4.0 / (d - 2)
    if mode == "occupation":
        if d < 5:
            raise ValueError("occupation energies need d >= 5")
        return 4, 16.0 / ((d - 2) * (d - 4))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class EnergyRow:
    eps: float
    value: float     # mean of eps^{d-gamma} (2 pi)^{d/2} S_eps
    target: float    # mean of constant * mass
    ratio: float     # mean of the per-realization ratios
    stderr: float    # of the ratio
    guarded: bool


def normalized_energies(mu: WeightedPointMeasure, eps_list, d: int, mode: str = "occupation",
                        rows: int | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """eps^{d-gamma} (2 pi)^{d/2} S_eps(mu) for every eps (row-sampled when ``rows`` is set)."""
    gamma, _ = energy_constant(d, mode)
    rng = rng or np.random.default_rng(0)
    out = []
    for e in np.asarray(eps_list, dtype=np.float64):
        s = s_energy_sampled(mu, e, rows, rng)[0] if rows else s_energy(mu, e, cutoff=CUTOFF)
        out.append(e ** (d - gamma) * (2.0 * math.pi) ** (d / 2.0) * s)
    return np.array(out)


def energy_rows(values, masses, eps_list, d: int, mode: str = "occupation", guard: float = 0.0) -> list[EnergyRow]:
    """Rows from per-realization normalized energies (one row of ``values`` each) and masses."""
    _, const = energy_constant(d, mode)
    eps = np.asarray(eps_list, dtype=np.float64)
    vals = np.atleast_2d(np.asarray(values, dtype=np.float64)).reshape(-1, eps.size)
    mass = np.asarray(masses, dtype=np.float64)
    ok = mass > 0
    out = []
    for k, e in enumerate(eps):
        r = vals[ok, k] / (const * mass[ok])
        se = float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else math.nan
        out.append(EnergyRow(float(e), float(vals[:, k].mean()) if vals.size else 0.0,
                             float(const * mass.mean()) if mass.size else 0.0,
                             float(r.mean()) if r.size else 0.0, se, bool(e >= guard)))
    return out


def energy_scaling_check(measures, eps_list, d: int, mode: str = "occupation", rows: int | None = None,
                         rng: np.random.Generator | None = None, guard: float = 0.0) -> list[EnergyRow]:
    """Normalized S_eps of each measure against the limit constant times its mass.

    ``measures`` are occupation measures already restricted to the lifetime
    window [t, T] (mode "occupation") or level-t slices (mode "slice").  With
    ``rows`` set, energies are row-sampled; otherwise they are summed exactly
    with the kernel cutoff.  Realizations of zero mass are left out of the
    ratio.  Rows with eps below ``guard`` are flagged.
    """
    rng = rng or np.random.default_rng(0)
    vals = [normalized_energies(mu, eps_list, d, mode, rows, rng) for mu in measures]
    return energy_rows(vals, [mu.total_mass for mu in measures], eps_list, d, mode, guard)
