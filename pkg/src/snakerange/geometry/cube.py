"""Reference constants for the flat cube [0,1]^p embedded in R^d."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import comb, erf

from ..moments import ball_volume, sphere_area
from ..snake import WeightedPointMeasure
from .capacity import Kernel


@dataclass(frozen=True)
class CubeReference:
    p: int
    d: int
    volume_limit_stated: float   # 2 pi^{k/2} / Gamma(k/2), k = d - p (area of the unit k-sphere)
    volume_limit: float          # pi^{k/2} / Gamma(k/2 + 1) (volume of the unit k-ball)
    energy_limit: float          # (2 pi)^{(p-d)/2}
    kernel_integral: float       # int_0^1 f(r) r^{p-1} dr (inf when divergent)
    cap_comparison: float        # 1 / kernel_integral (0 when divergent)


def cube_reference(p: int, d: int, kernel: Kernel | None = None) -> CubeReference:
    """Limits of eps^{p-d} |([0,1]^p)^eps| and eps^{d-p} S_eps(Lebesgue), and the capacity integral.

    The eps-neighborhood volume tends to the volume of the unit (d-p)-ball.
    The sphere-area constant is kept alongside for comparison; it is larger by
    the factor d - p.
    """
    if not 1 <= p <= d:
        raise ValueError("need 1 <= p <= d")
    k = d - p
    stated = float(sphere_area(k)) if k >= 1 else math.nan
    vol = float(ball_volume(k, 1.0)) if k >= 1 else 1.0
    energy = (2.0 * math.pi) ** (-k / 2.0)
    integral, cap = math.nan, math.nan
    if kernel is not None:
        integral = kernel_radial_integral(kernel, p)
        cap = 0.0 if math.isinf(integral) else 1.0 / integral
    return CubeReference(p, d, stated, vol, energy, integral, cap)


def kernel_radial_integral(kernel: Kernel, p: int) -> float:
    """int_0^1 f(r) r^{p-1} dr; power kernels are done in closed form, inf when divergent."""
    if kernel.family == "power":
        e = p - kernel.beta
        return math.inf if e <= 0 else 1.0 / e
    val, _ = integrate.quad(lambda r: float(kernel(r)) * r ** (p - 1), 0.0, 1.0, limit=200)
    return val


def steiner_volume(p: int, d: int, eps: float) -> float:
    """|([0,1]^p)^eps| in R^d: sum_j C(p, j) kappa_{d-j} eps^{d-j} over the j-faces."""
    if not 1 <= p <= d:
        raise ValueError("need 1 <= p <= d")
    return math.fsum(comb(p, j, exact=True) * ball_volume(d - j, 1.0) * eps ** (d - j)
                     for j in range(p + 1))


def cube_distance(x: np.ndarray, p: int) -> np.ndarray:
    """Euclidean distance from points of R^d to [0,1]^p x {0}^{d-p}."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    inside = np.clip(x[:, :p], 0.0, 1.0)
    return np.sqrt(np.sum((x[:, :p] - inside) ** 2, axis=1) + np.sum(x[:, p:] ** 2, axis=1))


def cube_neighborhood_mc(p: int, d: int, eps: float, M: int, rng: np.random.Generator) -> tuple[float, float]:
    """Hit-or-miss |([0,1]^p)^eps| with exact distances, sampling the bounding box."""
    lo = np.concatenate((np.full(p, -eps), np.full(d - p, -eps)))
    hi = np.concatenate((np.full(p, 1.0 + eps), np.full(d - p, eps)))
    box = float(np.prod(hi - lo))
    x = lo + (hi - lo) * rng.random((M, d))
    hit = cube_distance(x, p) <= eps
    q = float(hit.mean())
    return box * q, box * math.sqrt(q * (1.0 - q) / M)


def lebesgue_grid(p: int, d: int, m: int) -> WeightedPointMeasure:
    """Lebesgue measure on [0,1]^p as m^p cell-center atoms of weight m^{-p}, embedded in R^d."""
    if not 1 <= p <= d:
        raise ValueError("need 1 <= p <= d")
    c = (np.arange(m) + 0.5) / m
    grids = np.meshgrid(*([c] * p), indexing="ij")
    pts = np.zeros((m ** p, d))
    for i, g in enumerate(grids):
        pts[:, i] = g.ravel()
    return WeightedPointMeasure(pts, np.full(m ** p, float(m) ** -p))


def grid_energy_separable(p: int, d: int, m: int, eps: float) -> float:
    """S_eps of lebesgue_grid(p, d, m), using that the heat kernel factorizes over coordinates."""
    c = (np.arange(m) + 0.5) / m
    diff = c[:, None] - c[None, :]
    one = np.sum(np.exp(-diff * diff / (2.0 * eps * eps))) / (m * m) / math.sqrt(2.0 * math.pi * eps * eps)
    return one ** p * (2.0 * math.pi * eps * eps) ** (-(d - p) / 2.0)


def lebesgue_energy(p: int, d: int, eps: float) -> float:
    """S_eps of Lebesgue measure on [0,1]^p in R^d, in closed form."""
    a = 1.0 / (eps * math.sqrt(2.0))
    one = erf(a) - (1.0 - math.exp(-a * a)) / (a * math.sqrt(math.pi))
    return one ** p * (2.0 * math.pi * eps * eps) ** (-(d - p) / 2.0)
