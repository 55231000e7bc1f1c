"""Moment formulas for the snake occupation measures.

Two families:

* the h_n hierarchy for test functions that are constant in space, where the
  heat semigroup acts trivially and everything stays a rational piecewise
  polynomial in time;
* Green-kernel moments of the total occupation of a ball, reduced to radial
  integrals with Newton's shell theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma, gammainc
from scipy.stats import ncx2

from .excursion import ITO_DENSITY


def gamma_seq(N: int) -> list[Fraction]:
    """gamma_1..gamma_N with gamma_1 = 1/2 and gamma_n = 1/2 sum gamma_k gamma_{n-k}."""
    if N < 1:
        raise ValueError("N must be >= 1")
    g = [Fraction(0), Fraction(1, 2)]
    for n in range(2, N + 1):
        g.append(Fraction(1, 2) * sum(g[k] * g[n - k] for k in range(1, n)))
    return g[1:]


def gamma_generating(lam: float, N: int = 60) -> float:
    """sum_{n<=N} gamma_n lam^n, evaluated in floating point."""
    return math.fsum(float(c) * lam ** (n + 1) for n, c in enumerate(gamma_seq(N)))


# --- rational piecewise polynomials ----------------------------------------------------


def _poly_mul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_add(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _poly_eval(a, t):
    acc = Fraction(0) if isinstance(t, Fraction) else 0.0
    for c in reversed(a):
        acc = acc * t + c
    return acc


def _poly_antideriv(a):
    return [Fraction(0)] + [c / (i + 1) for i, c in enumerate(a)]


def _trim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Polynomials in absolute time t on [b_k, b_{k+1}); the last piece extends to +inf."""

    breaks: tuple  # b_0 = 0 < b_1 < ... (Fractions)
    pieces: tuple  # coefficient lists (lowest degree first), one per break

    def __post_init__(self):
        if len(self.breaks) != len(self.pieces) or not self.breaks or self.breaks[0] != 0:
            raise ValueError("breaks must start at 0 with one piece per break")
        if any(b >= c for b, c in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must increase")

    @classmethod
    def constant(cls, c) -> "PiecewisePolynomial":
        return cls((Fraction(0),), (tuple(_trim([Fraction(c)])),))

    @classmethod
    def indicator(cls, a, b) -> "PiecewisePolynomial":
        """1 on [a, b), 0 elsewhere on [0, inf)."""
        a, b = Fraction(a), Fraction(b)
        if a < 0 or b <= a:
            raise ValueError("need 0 <= a < b")
        if a == 0:
            return cls((Fraction(0), b), ((Fraction(1),), ()))
        return cls((Fraction(0), a, b), ((), (Fraction(1),), ()))

    def piece_index(self, t) -> int:
        k = 0
        for i, b in enumerate(self.breaks):
            if t >= b:
                k = i
        return k

    def __call__(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        return _poly_eval(self.pieces[self.piece_index(t)], t)

    def _refine(self, breaks):
        return tuple(self.pieces[self.piece_index(b)] for b in breaks)

    def _merged(self, other):
        breaks = tuple(sorted(set(self.breaks) | set(other.breaks)))
        return breaks, self._refine(breaks), other._refine(breaks)

    def __add__(self, other):
        br, a, b = self._merged(other)
        return PiecewisePolynomial(br, tuple(tuple(_trim(_poly_add(x, y))) for x, y in zip(a, b)))

    def __mul__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            c = Fraction(other)
            return PiecewisePolynomial(self.breaks, tuple(tuple(_trim([c * x for x in p])) for p in self.pieces))
        br, a, b = self._merged(other)
        return PiecewisePolynomial(br, tuple(tuple(_trim(_poly_mul(x, y))) for x, y in zip(a, b)))

    __rmul__ = __mul__

    def integral(self) -> "PiecewisePolynomial":
        """t -> int_0^t f, continuous across breaks."""
        out = []
        acc = Fraction(0)
        for k, p in enumerate(self.pieces):
            b = self.breaks[k]
            anti = _poly_antideriv(list(p))
            shift = acc - _poly_eval(anti, b)
            anti[0] += shift
            out.append(tuple(_trim(anti)))
            if k + 1 < len(self.breaks):
                acc = _poly_eval(anti, self.breaks[k + 1])
        return PiecewisePolynomial(self.breaks, tuple(out))

    def is_continuous(self) -> bool:
        for k in range(1, len(self.breaks)):
            b = self.breaks[k]
            if _poly_eval(self.pieces[k - 1], b) != _poly_eval(self.pieces[k], b):
                return False
        return True

    def equals(self, other: "PiecewisePolynomial") -> bool:
        br, a, b = self._merged(other)
        return all(_trim(x) == _trim(y) for x, y in zip(a, b))


@dataclass(frozen=True)
class MomentTable:
    order: int
    h: PiecewisePolynomial
    moment: Fraction  # n! h_n(t_star)


def h_hierarchy(phi: PiecewisePolynomial, N: int, t_star) -> list[MomentTable]:
    """Exact h_1..h_N for a test function constant in space.

    h_1(t) = int_0^t phi(t - s) ds = int_0^t phi(u) du and
    h_n(t) = 2 sum_{k=1}^{n-1} int_0^t h_k(u) h_{n-k}(u) du,
    so n! h_n(t*) is the n-th moment of int_0^{t*} (Y_{t*-s}, phi(s)) ds.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    t_star = Fraction(t_star)
    hs = [None, phi.integral()]
    for n in range(2, N + 1):
        acc = None
        for k in range(1, n):
            term = hs[k] * hs[n - k]
            acc = term if acc is None else acc + term
        hs.append((acc * 2).integral())
    return [MomentTable(n, hs[n], math.factorial(n) * hs[n](t_star)) for n in range(1, N + 1)]


def window_second_moment(t, T) -> Fraction:
    """Closed form 4[(T-t)^3/3 + (T-t)^2 t] of the second moment of int_t^T (Y_s, 1) ds."""
    t, T = Fraction(t), Fraction(T)
    return 4 * ((T - t) ** 3 / 3 + (T - t) ** 2 * t)


# --- Green kernel moments --------------------------------------------------------------


def green_constant(d: int) -> float:
    if d < 3:
        raise ValueError("Green kernel needs d >= 3")
    return gamma((d - 2) / 2.0) / (2.0 * math.pi ** (d / 2.0))


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def ball_volume(d: int, r: float = 1.0) -> float:
    return math.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0) * r ** d


@dataclass(frozen=True)
class KernelConstants:
    d: int

    @property
    def c_green(self) -> float:
        return green_constant(self.d)

    def heat(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        r2 = np.sum(x * x, axis=-1)
        return (2.0 * math.pi * t) ** (-self.d / 2.0) * np.exp(-r2 / (2.0 * t))


def green(x, y, d: int) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = float(np.linalg.norm(x - y))
    if r == 0:
        raise ValueError("Green kernel is singular at x = y")
    return green_constant(d) * r ** (2 - d)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.radius < 0:
            raise ValueError("radius must be >= 0")

    @property
    def d(self) -> int:
        return self.center.size

    @property
    def volume(self) -> float:
        return ball_volume(self.d, self.radius)

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return np.sum((pts - self.center) ** 2, axis=-1) <= self.radius ** 2

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        g = rng.standard_normal((m, self.d))
        g /= np.linalg.norm(g, axis=1)[:, None]
        rad = self.radius * rng.random(m) ** (1.0 / self.d)
        return self.center + g * rad[:, None]


def newton_potential_ball(a, rho: float, d: int) -> np.ndarray:
    """int_{B(c, rho)} |x - y|^{2-d} dy for |x - c| = a (shell theorem).

    Outside: |B| a^{2-d}; inside: |S^{d-1}| (a^2/d + (rho^2 - a^2)/2).
    """
    a = np.asarray(a, dtype=np.float64)
    S = sphere_area(d)
    outside = ball_volume(d, rho) * np.where(a > 0, a, 1.0) ** (2.0 - d)
    inside = S * (a * a / d + (rho * rho - a * a) / 2.0)
    return np.where(a >= rho, outside, inside)


def ball_green_integral(x, A: Ball) -> float:
    """int_A G(x, y) dy in closed form."""
    a = float(np.linalg.norm(np.asarray(x, dtype=np.float64) - A.center))
    return float(green_constant(A.d) * newton_potential_ball(a, A.radius, A.d))


def occupation_first_moment(x, A: Ball, rtol: float = 1e-10) -> float:
    """N_x[int 1_A(W_s) ds] = int_A G(x, y) dy.

    Radial quadrature over shells of A centered at x's distance: each shell
    of radius s around the center of A contributes |S| s^{d-1} max(a, s)^{2-d}.
    """
    d = A.d
    a = float(np.linalg.norm(np.asarray(x, dtype=np.float64) - A.center))
    S = sphere_area(d)
    pts = [a] if 0 < a < A.radius else None
    val, _ = integrate.quad(lambda s: S * s ** (d - 1) * max(a, s) ** (2.0 - d), 0.0, A.radius,
                            epsrel=rtol, epsabs=0.0, points=pts, limit=200)
    return green_constant(d) * val


def occupation_second_moment(x, A: Ball, rtol: float = 1e-8) -> float:
    """N_x[(int 1_A(W_s) ds)^2] = 4 int G(x, y) [int_A G(y, z) dz]^2 dy.

    The bracket is radial about the center of A (closed form), so the outer
    integral is again a one-dimensional shell integral.
    """
    d = A.d
    if d < 5:
        raise ValueError("second moment is infinite-volume for d < 5 at these scales")
    a = float(np.linalg.norm(np.asarray(x, dtype=np.float64) - A.center))
    S = sphere_area(d)
    c = green_constant(d)

    def f(s):
        inner = c * float(newton_potential_ball(s, A.radius, d))
        return S * s ** (d - 1) * inner * inner * max(a, s) ** (2.0 - d)

    brk = sorted({A.radius, a} - {0.0})
    edges = [0.0] + brk + [max(brk[-1], 1.0) * 10.0]
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        v, _ = integrate.quad(f, lo, hi, epsrel=rtol, epsabs=0.0, limit=200)
        total += v
    v, _ = integrate.quad(f, edges[-1], np.inf, epsrel=rtol, epsabs=0.0, limit=200)
    total += v
    return 4.0 * c * total


def conditional_first_moment(path_points, times, A: Ball) -> float:
    """2 int_0^zeta dt int_A G(w(t), y) dy by the trapezoid rule on the given samples."""
    pts = np.atleast_2d(np.asarray(path_points, dtype=np.float64))
    t = np.asarray(times, dtype=np.float64)
    if t.size < 2:
        return 0.0
    a = np.linalg.norm(pts - A.center, axis=1)
    vals = green_constant(A.d) * newton_potential_ball(a, A.radius, A.d)
    return float(2.0 * np.trapezoid(vals, t))


def bm_hit_prob(x, r: float, d: int) -> float:
    """P_x(Brownian motion ever hits B(0, r)) = min(1, (r/|x|)^{d-2})."""
    if r <= 0:
        raise ValueError("r must be positive")
    nx = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=np.float64))))
    if nx <= r:
        return 1.0
    return (r / nx) ** (d - 2)


def bm_hit_integral(R0: float, r: float, d: int) -> float:
    """int_{B(0,R0)} min(1, (r/|x|)^{d-2}) dx in closed form (R0 >= r)."""
    S = sphere_area(d)
    if R0 <= r:
        return ball_volume(d, R0)
    return ball_volume(d, r) + S * r ** (d - 2) * (R0 * R0 - r * r) / 2.0


# --- level occupation under the duration-restricted measure -------------------------------


def level_density(t, r) -> np.ndarray:
    """Expected local time at level t of a duration-r excursion: 4t exp(-2t^2/r)."""
    t = np.asarray(t, dtype=np.float64)
    return 4.0 * t * np.exp(-2.0 * t * t / r)


def occupation_window_moment(x, A: Ball, r_lo: float, r_hi: float) -> float:
    """Excursion-measure mean of int 1_A(W_s) ds restricted to durations in [r_lo, r_hi].

    Equals int dr c r^{-3/2} int_0^inf dt 4t e^{-2t^2/r} P_x(B_t in A); with the
    full window this is int_A G(x, y) dy.  The r-integral is done in closed
    form through the incomplete gamma function.
    """
    d = A.d
    a = float(np.linalg.norm(np.asarray(x, dtype=np.float64) - A.center))

    # int_{r_lo}^{r_hi} c r^{-3/2} 4t e^{-2t^2/r} dr = 4tc sqrt(pi)/(sqrt2 t) * [erf-type window]
    # with y = 2t^2/r: r^{-3/2} dr = -(2t^2)^{-1/2} y^{-1/2} dy, so the window is a
    # regularized gamma(1/2) increment between y = 2t^2/r_hi and 2t^2/r_lo.
    def weight(t):
        y_lo = 2.0 * t * t / r_hi if math.isfinite(r_hi) else 0.0
        y_hi = 2.0 * t * t / r_lo if r_lo > 0 else math.inf
        frac = gammainc(0.5, y_hi) - gammainc(0.5, y_lo)
        return 4.0 * ITO_DENSITY * math.sqrt(math.pi / 2.0) * frac

    def p_ball(t):
        # P(|a e_1 + B_t - c| <= rho): noncentral chi-square
        return float(ncx2.cdf(A.radius ** 2 / t, d, a * a / t)) if a > 0 else float(
            gammainc(d / 2.0, A.radius ** 2 / (2.0 * t)))

    f = lambda t: weight(t) * p_ball(t)
    scale = max(a, A.radius) ** 2
    val = 0.0
    for lo, hi in [(0.0, scale / 50), (scale / 50, scale), (scale, 20 * scale), (20 * scale, 2000 * scale)]:
        v, _ = integrate.quad(f, lo, hi, epsrel=1e-10, epsabs=0.0, limit=400)
        val += v
    v, _ = integrate.quad(f, 2000 * scale, np.inf, epsrel=1e-8, epsabs=0.0, limit=400)
    return val + v
