"""Lifetime processes for the snake.

The lifetime of the discrete snake is a Dyck path with steps of size
``sqrt(ds)``, where ``ds`` is the contour time step.  Durations under the
excursion measure are drawn from the truncated density ``ITO_DENSITY * r**-1.5``
with an importance weight, so that weighted ensembles represent the
sigma-finite excursion measure restricted to a duration window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

# Density of the duration sigma under the excursion measure:
# N_0(sigma in dr) = ITO_DENSITY * r**-1.5 dr.  This constant is fixed by
# N_0(sup zeta > t) = 1/(2t) together with E[max of a normalized excursion]
# = sqrt(pi/2).
ITO_DENSITY = 1.0 / (2.0 * math.sqrt(2.0 * math.pi))

EXCURSION_MAX_MEAN = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class LifetimePath:
    """Discretized lifetime excursion on a uniform contour grid.

    ``heights`` is the integer Dyck path (length 2n+1); lifetime values are
    ``sqrt(contour_step) * heights`` so that every step has size
    ``sqrt(contour_step)``.
    """

    heights: np.ndarray
    duration: float
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = np.asarray(self.heights)
        if h.ndim != 1 or h.size < 3 or h.size % 2 == 0:
            raise ValueError("heights must have odd length 2n+1 >= 3")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        h = h.astype(np.int32, copy=False)
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        vals = math.sqrt(self.contour_step) * h.astype(np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return (self.heights.size - 1) // 2

    @property
    def step_count(self) -> int:
        return self.heights.size - 1

    @property
    def contour_step(self) -> float:
        return self.duration / self.step_count

    @property
    def max_value(self) -> float:
        return math.sqrt(self.contour_step) * int(self.heights.max())

    def check(self) -> None:
        """Raise if the path is not a nonnegative lattice excursion."""
        h = self.heights
        if h[0] != 0 or h[-1] != 0:
            raise AssertionError("path must start and end at 0")
        if np.any(h < 0):
            raise AssertionError("path must be nonnegative")
        if not np.all(np.abs(np.diff(h)) == 1):
            raise AssertionError("steps must be +-1")


def dyck_heights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform Dyck path of length 2n via the cycle lemma.

    A uniform arrangement of n up-steps and n+1 down-steps has exactly one
    cyclic rotation whose partial sums stay >= 0 until the last step; dropping
    that last down-step leaves a uniform Dyck path.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    steps = np.full(2 * n + 1, -1, dtype=np.int8)
    steps[rng.choice(2 * n + 1, size=n, replace=False)] = 1
    walk = np.cumsum(steps, dtype=np.int64)
    k = int(np.argmin(walk))  # first time the global minimum is reached
    rotated = np.roll(steps, -(k + 1))[:-1]
    heights = np.zeros(2 * n + 1, dtype=np.int32)
    np.cumsum(rotated, out=heights[1:])
    return heights


def sample_normalized_excursion(n: int, rng: np.random.Generator) -> LifetimePath:
    """Uniform Dyck path with 2n steps, scaled to duration 1."""
    return LifetimePath(dyck_heights(n, rng), 1.0)


def rescale(path: LifetimePath, r: float) -> LifetimePath:
    """Same lattice path with duration ``r`` (lifetime scaled by sqrt of the ratio)."""
    if not r > 0:
        raise ValueError("target duration must be positive")
    return LifetimePath(path.heights, float(r))


# --- durations under the excursion measure -------------------------------------


def duration_mass(r_min: float, r_max: float) -> float:
    """Excursion-measure mass of {r_min <= sigma <= r_max}."""
    tail = 0.0 if math.isinf(r_max) else r_max ** -0.5
    return 2.0 * ITO_DENSITY * (r_min ** -0.5 - tail)


@dataclass(frozen=True)
class DurationSample:
    """Durations drawn from the truncated r**-1.5 law.

    ``weight`` is the excursion-measure mass carried by each sample, so that
    ``weight * sum(f(sample))`` estimates the measure of ``f`` on the window.
    """

    durations: np.ndarray
    weight: float
    r_min: float
    r_max: float

    @property
    def duration(self) -> float:
        return float(self.durations[0])

    @property
    def window_mass(self) -> float:
        return duration_mass(self.r_min, self.r_max)

    @property
    def upper_tail_mass(self) -> float:
        """Mass of {sigma > r_max}; the mass below r_min is infinite."""
        return 2.0 * ITO_DENSITY * self.r_max ** -0.5


def sample_duration(r_min: float, r_max: float, rng: np.random.Generator, size: int = 1) -> DurationSample:
    """Inverse-CDF draws with density proportional to r**-1.5 on [r_min, r_max]."""
    if not (0 < r_min <= r_max) or math.isinf(r_max):
        raise ValueError("need 0 < r_min <= r_max < inf")
    if size < 1:
        raise ValueError("size must be >= 1")
    a, b = r_min ** -0.5, r_max ** -0.5
    if r_min == r_max:
        return DurationSample(np.full(size, float(r_min)), 0.0, r_min, r_max)
    u = rng.random(size)
    r = (a - u * (a - b)) ** -2.0
    np.clip(r, r_min, r_max, out=r)
    return DurationSample(r, duration_mass(r_min, r_max) / size, r_min, r_max)


# --- maximum of the normalized excursion ---------------------------------------


def excursion_max_sf(x: float) -> float:
    """P(max of a normalized Brownian excursion > x) (theta-series)."""
    if x <= 0:
        return 1.0
    k = np.arange(1, 60, dtype=np.float64)
    if x >= 1.0:
        s = 2.0 * np.sum((4.0 * k * k * x * x - 1.0) * np.exp(-2.0 * k * k * x * x))
        return float(min(1.0, max(0.0, s)))
    cdf = math.sqrt(2.0) * math.pi ** 2.5 / x ** 3 * np.sum(k * k * np.exp(-(math.pi ** 2) * k * k / (2.0 * x * x)))
    return float(min(1.0, max(0.0, 1.0 - cdf)))


def height_mass(t: float, r_min: float = 0.0, r_max: float = math.inf) -> float:
    """Excursion-measure mass of {sup zeta > t, r_min <= sigma <= r_max}.

    Computed in the continuum; with the full window it equals 1/(2t).
    Uses x = t/sqrt(r) as the integration variable.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x_lo = 0.0 if math.isinf(r_max) else t / math.sqrt(r_max)
    x_hi = math.inf if r_min <= 0 else t / math.sqrt(r_min)
    val, _ = integrate.quad(excursion_max_sf, x_lo, min(x_hi, 12.0), limit=200, epsabs=1e-14)
    return 2.0 * ITO_DENSITY / t * val


@dataclass(frozen=True)
class HeightConditioned:
    """Excursion with duration in a window and sup above a level.

    ``weight`` is the continuum mass of the target set; an ensemble of k such
    draws represents the restricted excursion measure with weight/k each.
    """

    path: LifetimePath
    weight: float
    tries: int
    excluded_mass: float


def condition_height(t_min: float, r_min: float, r_max: float, rng: np.random.Generator,
                     n: int = 1000, max_tries: int = 100000) -> HeightConditioned:
    """Rejection sampling of an excursion with max > t_min and duration in the window.

    The window mass of the target set and the excluded mass (sup > t_min with
    duration outside the window) are exact continuum values.
    """
    if t_min <= 0:
        raise ValueError("t_min must be positive")
    if not (0 < r_min <= r_max):
        raise ValueError("need 0 < r_min <= r_max")
    if r_max < t_min ** 2 * 1e-3:
        raise RuntimeError("r_max far too small for the requested height")
    for tries in range(1, max_tries + 1):
        r = sample_duration(r_min, r_max, rng).duration
        heights = dyck_heights(n, rng)
        if math.sqrt(r / (2 * n)) * int(heights.max()) > t_min:
            path = LifetimePath(heights, r)
            inside = height_mass(t_min, r_min, r_max)
            excluded = 1.0 / (2.0 * t_min) - inside
            return HeightConditioned(path, inside, tries, max(excluded, 0.0))
    raise RuntimeError(f"no excursion above {t_min} in {max_tries} tries; increase r_max")


def estimate_height_mass(t_min: float, r_min: float, r_max: float, proposals: int,
                         rng: np.random.Generator, n: int = 1000) -> tuple[float, float, float]:
    """Unbiased estimate of N_0(sup > t_min, sigma in window) from a fixed number of proposals.

    Returns (estimate, stderr, acceptance rate).
    """
    ds = sample_duration(r_min, r_max, rng, size=proposals)
    hits = 0
    for r in ds.durations:
        heights = dyck_heights(n, rng)
        if math.sqrt(r / (2 * n)) * int(heights.max()) > t_min:
            hits += 1
    m = ds.window_mass
    p = hits / proposals
    return m * p, m * math.sqrt(max(p * (1 - p), 0.0) / proposals), p


def local_time_band(path: LifetimePath, t: float, delta: float | None = None) -> tuple[np.ndarray, float]:
    """Contour indices with lifetime in [t, t+delta) and their common weight ds/delta.

    Indices run over the 2n left endpoints of the contour grid, so summing
    delta * (band mass) over a partition of levels gives the duration.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if delta is None:
        delta = path.contour_step ** 0.25
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = path.values[:-1]
    idx = np.flatnonzero((z >= t) & (z < t + delta))
    return idx, path.contour_step / delta


def expected_dyck_max(n: int) -> float:
    """Exact mean of the maximum of a uniform Dyck path of length 2n (integer units).

    Paths confined to [0, h] are counted by reflection in the barriers -1 and
    h + 1: sum over k of C(2n, n + k(h+2)) - C(2n, n + 1 + k(h+2)).
    """
    row = [1]
    for m in range(2 * n):
        row.append(row[-1] * (2 * n - m) // (m + 1))
    total = row[n] // (n + 1)

    def comb(m: int) -> int:
        return row[m] if 0 <= m <= 2 * n else 0

    def count_below(h: int) -> int:
        p = h + 2
        kmax = n // p + 1
        return sum(comb(n + k * p) - comb(n + 1 + k * p) for k in range(-kmax - 1, kmax + 1))

    acc = sum(total - count_below(h) for h in range(n))  # sum of P(max > h)
    return float(Fraction(acc, total))
