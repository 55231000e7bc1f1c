"""Exact coefficient sequences of the far-field expansion of u_1.

``q_n`` (d >= 5) gives the convergent expansion of r^{d-2} u_1 in powers of
r^{4-d}; the radius of convergence of sum q_n s^n encodes a_0.  ``rho_n``
(d = 4) gives the divergent asymptotic expansion of w' in powers of w, where
w(s) = r^2 u_1(r) with s = log(2 r^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

EXACT_LIMIT = 300  # beyond this many terms the q recurrence switches to scaled floats


@dataclass(frozen=True)
class SeriesCoefficients:
    """A coefficient sequence; ``exact`` holds rationals, ``scaled`` the float tail.

    For kind "q" the float values are ``scaled[n] = q_n * scale**n`` so that they
    stay in floating-point range; ``exact`` covers indices below EXACT_LIMIT.
    """

    kind: str
    exact: tuple
    dimension: int | None = None
    scaled: np.ndarray | None = field(default=None, repr=False)
    scale: float = 1.0

    @property
    def delta(self) -> Fraction | None:
        if self.dimension is None:
            return None
        return Fraction(self.dimension - 4, self.dimension - 2)

    @property
    def size(self) -> int:
        return len(self.exact) if self.scaled is None else self.scaled.size

    def log_value(self, n: int) -> float:
        """log of the n-th coefficient (valid for both exact and float parts)."""
        if n < len(self.exact):
            v = self.exact[n]
            return math.log(v.numerator) - math.log(v.denominator)
        return math.log(self.scaled[n]) - n * math.log(self.scale)


def _q_exact(delta: Fraction, N: int) -> list[Fraction]:
    q = [Fraction(1)]
    for n in range(1, N + 1):
        s = sum(q[k] * q[n - 1 - k] for k in range(n))
        nd = n * delta
        q.append(s / (nd * (nd + 1)))
    return q


def q_seq(d: int, N: int) -> SeriesCoefficients:
    """q_0..q_N: exact rationals up to EXACT_LIMIT, then normalized floats."""
    if d < 5:
        raise ValueError("q sequence needs d >= 5")
    if N < 0:
        raise ValueError("N must be >= 0")
    delta = Fraction(d - 4, d - 2)
    n_exact = min(N, EXACT_LIMIT)
    exact = _q_exact(delta, n_exact)
    if N <= EXACT_LIMIT:
        return SeriesCoefficients("q", tuple(exact), d)
    # choose the scale from the last exact ratio so scaled values grow only linearly
    scale = float(exact[-2] / exact[-1])
    dl = float(delta)
    out = np.empty(N + 1)
    for n in range(n_exact + 1):
        out[n] = math.exp(math.log(exact[n].numerator) - math.log(exact[n].denominator) + n * math.log(scale))
    for n in range(n_exact + 1, N + 1):
        s = float(np.dot(out[:n], out[n - 1::-1]))
        out[n] = scale * s / (n * dl * (n * dl + 1.0))
        if not math.isfinite(out[n]):
            raise OverflowError("scaled q recurrence overflowed")
    return SeriesCoefficients("q", tuple(exact), d, out, scale)


def check_q_recurrence(c: SeriesCoefficients) -> bool:
    """Re-verify the exact part of the q recurrence in rational arithmetic."""
    q = c.exact
    delta = c.delta
    if q[0] != 1:
        return False
    for n in range(1, len(q)):
        nd = n * delta
        if q[n] * nd * (nd + 1) != sum(q[k] * q[n - 1 - k] for k in range(n)):
            return False
    return all(v > 0 for v in q)


@dataclass(frozen=True)
class RadiusEstimate:
    radius: float
    error: float
    a0: float
    a0_error: float
    plain_ratio: float
    pole_corrected: float
    aitken: float
    root_test: float


def _aitken(x0: float, x1: float, x2: float) -> float:
    den = x2 - 2 * x1 + x0
    if den == 0:
        return x2
    return x2 - (x2 - x1) ** 2 / den


def a0_from_series(c: SeriesCoefficients) -> RadiusEstimate:
    """Radius of convergence of sum q_n s^n, hence a_0 = radius * (d-2)^2 / 4.

    The ratios q_{n-1}/q_n approach the radius R like R*n/(n+1) because the
    singularity is a double pole; the ratios are corrected by (n+1)/n and the
    corrected tail is Aitken-extrapolated.  The error bar is the spread between
    the plain, corrected and extrapolated values.
    """
    if c.kind != "q":
        raise ValueError("radius estimate needs a q sequence")
    N = c.size - 1
    if N < 50:
        raise ValueError("need at least 50 coefficients")
    if c.scaled is not None:
        vals = c.scaled
        ratios = c.scale * vals[:-1] / vals[1:]
    else:
        ratios = np.array([float(c.exact[n - 1] / c.exact[n]) for n in range(1, N + 1)])
    n = np.arange(1, N + 1, dtype=np.float64)
    corrected = ratios * (n + 1) / n
    tail = corrected[N // 2:]
    dif = np.diff(tail)
    noise = 1e-11 * abs(tail[-1])  # rounding level of the scaled recurrence
    if np.any(dif > noise) and np.any(dif < -noise):
        raise ArithmeticError("ratio tail is not monotone; increase N")
    ait = _aitken(corrected[-3], corrected[-2], corrected[-1])
    root = math.exp(-c.log_value(N) / N)
    spread = max(abs(ait - corrected[-1]), abs(corrected[-1] - ratios[-1]) / N)
    d = c.dimension
    k = (d - 2) ** 2 / 4.0
    return RadiusEstimate(ait, spread, ait * k, spread * k, float(ratios[-1]), float(corrected[-1]), ait, root)


def series_u1(d: int, r, coeffs: SeriesCoefficients, a0: float, terms: int | None = None) -> np.ndarray:
    """u_1(r) = r^{2-d} sum_n a_n r^{-n(d-4)} with a_n built from q_n and a_0."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 1):
        raise ValueError("series representation needs r > 1")
    dd = d - 2
    q = 4.0 * a0 * dd ** (-d / dd)
    lead = 0.25 * dd ** (d / dd)
    rho = dd ** (-(d - 4) / dd)
    N = coeffs.size - 1 if terms is None else min(terms, coeffs.size - 1)
    # log a_n = log lead + log q_n + (n+1) log q + n log rho
    total = np.zeros_like(r)
    x = np.log(r) * (4 - d)
    for n in range(N + 1):
        la = math.log(lead) + coeffs.log_value(n) + (n + 1) * math.log(q) + n * math.log(rho)
        term = np.exp(la + n * x)
        total += term
        if n > 10 and np.all(term < 1e-17 * total):
            break
    return r ** (2 - d) * total


def rho_seq(N: int) -> SeriesCoefficients:
    """rho_2..rho_N (stored with index offset: exact[k] = rho_{k+2})."""
    if N < 2:
        raise ValueError("N must be >= 2")
    rho = {2: 1}
    for n in range(3, N + 1):
        rho[n] = sum(k * rho[k] * rho[n - k + 1] for k in range(2, n))
    return SeriesCoefficients("rho", tuple(Fraction(rho[n]) for n in range(2, N + 1)))


def rho_value(c: SeriesCoefficients, n: int) -> Fraction:
    return c.exact[n - 2]


def check_rho_recurrence(c: SeriesCoefficients) -> bool:
    N = len(c.exact) + 1
    if rho_value(c, 2) != 1:
        return False
    for n in range(3, N + 1):
        if rho_value(c, n) != sum(k * rho_value(c, k) * rho_value(c, n - k + 1) for k in range(2, n)):
            return False
    return all(v > 0 for v in c.exact)


def rho_asymptotic(c: SeriesCoefficients, w: float) -> tuple[float, int, float]:
    """Optimally truncated sum of (-1)^{n+1} rho_n w^n.

    Returns (partial sum, truncation index, size of the first omitted term).
    """
    N = len(c.exact) + 1
    terms = [(-1) ** (n + 1) * float(rho_value(c, n)) * w ** n for n in range(2, N + 1)]
    mags = [abs(t) for t in terms]
    k = int(np.argmin(mags))  # smallest term; sum everything before it
    return math.fsum(terms[:k]), k + 2, mags[k]
