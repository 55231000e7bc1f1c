"""Maximal solution u_1 of u'' + (d-1)/r u' = 4 u^2 on r > 1 with u(1+) = infinity.

The solution is computed by shooting inward from the far field, where the
decaying solution is known to leading order, until it blows up.  The ODE is
invariant under u(r) -> lam^2 u(lam r), so moving the blow-up point to r = 1
fixes the solution and gives a_0 directly.

Variables: s = log r, g(s) = r^{d-2} u(r) and v = g^{-1/2}.  Then
    g'' - (d-2) g' = 4 e^{(4-d)s} g^2,
    v'' = (3 v'^2 + (d-2) v v' - 2 e^{(4-d)s}) / v,
and v vanishes linearly at the blow-up point, where a root is located to
machine precision.  Integrating inward damps the far-field error mode
e^{(d-2)s}, so the result does not depend on where the shooting starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gamma

from .series import rho_asymptotic


@dataclass(frozen=True)
class ShootingInfo:
    s_start: float
    s_blowup: float
    v_stop: float
    nfev: int
    rtol: float


@dataclass(frozen=True)
class RadialSolution:
    """u_1 on the grid r_i = 1 + x_i, x geometric from h to R_max - 1."""

    d: int
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    a0_ode: float
    info: ShootingInfo
    _spline: CubicHermiteSpline = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        y = np.log(self.r - 1.0)
        logu = np.log(self.u)
        slope = (self.r - 1.0) * self.du / self.u
        object.__setattr__(self, "_spline", CubicHermiteSpline(y, logu, slope))

    @property
    def h(self) -> float:
        return float(self.r[0] - 1.0)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def g(self) -> np.ndarray:
        """r^{d-2} u on the grid."""
        return self.r ** (self.d - 2) * self.u

    def __call__(self, rr) -> np.ndarray:
        return self.value(rr)

    def value(self, rr) -> np.ndarray:
        """u_1 at radii > 1.

        Inside the grid: cubic Hermite interpolation of log u against log(r-1)
        with exact slopes.  Below 1+h: the blow-up balance 3/2 (r-1)^{-2}.
        Beyond R_max: the far-field power law matched at R_max (times the
        log correction for d = 4).
        """
        rr = np.asarray(rr, dtype=np.float64)
        if np.any(rr <= 1.0):
            raise ValueError("u_1 is defined for r > 1 only")
        out = np.empty_like(rr)
        lo = rr < self.r[0]
        hi = rr > self.r[-1]
        mid = ~(lo | hi)
        out[mid] = np.exp(self._spline(np.log(rr[mid] - 1.0)))
        out[lo] = 1.5 * (rr[lo] - 1.0) ** -2.0 * (self.u[0] * self.h ** 2 / 1.5)
        R = self.r[-1]
        if self.d == 4:
            out[hi] = self.u[-1] * (R / rr[hi]) ** 2 * math.log(R) / np.log(rr[hi])
        else:
            out[hi] = self.u[-1] * (R / rr[hi]) ** (self.d - 2)
        return out

    def log_derivative(self, rr) -> np.ndarray:
        """u_1'(r)/u_1(r)."""
        rr = np.asarray(rr, dtype=np.float64)
        if np.any(rr <= 1.0):
            raise ValueError("u_1 is defined for r > 1 only")
        out = np.empty_like(rr)
        lo = rr < self.r[0]
        hi = rr > self.r[-1]
        mid = ~(lo | hi)
        out[mid] = self._spline(np.log(rr[mid] - 1.0), 1) / (rr[mid] - 1.0)
        out[lo] = -2.0 / (rr[lo] - 1.0)
        if self.d == 4:
            out[hi] = -2.0 / rr[hi] - 1.0 / (rr[hi] * np.log(rr[hi]))
        else:
            out[hi] = (2.0 - self.d) / rr[hi]
        return out

    def derivative(self, rr) -> np.ndarray:
        return self.value(rr) * self.log_derivative(rr)

    def monotone(self) -> tuple[bool, bool]:
        """(u strictly decreasing, r^{d-2} u strictly decreasing) on the grid."""
        return bool(np.all(np.diff(self.u) < 0)), bool(np.all(np.diff(self.g) < 0))

    def to_rows(self):
        return [(float(a), float(b), float(c), float(e)) for a, b, c, e in zip(self.r, self.u, self.du, self.g)]


def _far_field(d: int, s: float) -> tuple[float, float]:
    """Leading decaying solution (g, g') at large s."""
    if d > 4:
        a1 = 2.0 / ((d - 4) * (d - 3))
        e = math.exp((4 - d) * s)
        return 1.0 + a1 * e, a1 * (4 - d) * e
    return 1.0 / (2.0 * s), -1.0 / (2.0 * s * s)


def shoot(d: int, rtol: float = 1e-12, v_stop: float = 1e-7, s_start: float | None = None):
    """Integrate inward from the far field; returns (s_blowup, dense solution, info)."""
    if d < 4:
        raise ValueError("d must be >= 4")
    if s_start is None:
        s_start = 40.0 / (d - 4) + 12.0 if d > 4 else 40.0
    g, gp = _far_field(d, s_start)
    v0 = g ** -0.5
    vp0 = -0.5 * g ** -1.5 * gp

    def rhs(s, y):
        v, vp = y
        return [vp, (3.0 * vp * vp + (d - 2) * v * vp - 2.0 * math.exp((4 - d) * s)) / v]

    def hit(s, y):
        return y[0] - v_stop

    hit.terminal = True
    sol = solve_ivp(rhs, [s_start, -200.0], [v0, vp0], method="DOP853", rtol=rtol,
                    atol=rtol * 1e-2, events=hit, dense_output=True)
    if sol.status != 1 or not sol.t_events[0].size:
        raise RuntimeError("inward shooting did not reach the blow-up point")
    s_hit = float(sol.t_events[0][0])
    v_hit, vp_hit = sol.y_events[0][0]
    # v is linear in s to O(v^2) near the root
    s_blow = s_hit - v_hit / vp_hit
    info = ShootingInfo(s_start, s_blow, v_stop, int(sol.nfev), rtol)
    return s_blow, sol, info


def solve_u1(d: int, h: float = 1e-6, R_max: float = 1e3, tol: float = 1e-12, n_grid: int = 4000) -> RadialSolution:
    """Maximal solution with blow-up at r = 1 on a grid from 1+h to R_max."""
    if not 0 < h < 1e-2:
        raise ValueError("h must be small and positive")
    if R_max <= 10:
        raise ValueError("R_max must exceed 10")
    s_blow, sol, info = shoot(d, rtol=tol)
    x = np.geomspace(h, R_max - 1.0, n_grid)
    r = 1.0 + x
    s = s_blow + np.log1p(x)
    if s[0] - s_blow <= s_blow - sol.t_events[0][0]:
        raise RuntimeError("h is inside the blow-up stopping layer; increase h or reduce v_stop")
    if s[-1] > info.s_start:
        raise RuntimeError("R_max beyond the shooting start; increase s_start")
    v, vp = sol.sol(s)
    g = v ** -2.0
    gp = -2.0 * v ** -3.0 * vp
    scale = math.exp((4 - d) * s_blow)  # r*^{4-d}
    u = scale * r ** (2.0 - d) * g
    du = scale * r ** (1.0 - d) * (gp + (2.0 - d) * g)
    a0 = scale if d > 4 else 0.5
    out = RadialSolution(d, r, u, du, a0, info)
    dec_u, dec_g = out.monotone()
    if not (dec_u and dec_g and np.all(u > 0)):
        raise ArithmeticError("monotonicity certificate failed; tighten tol")
    return out


# --- constants and bounds ------------------------------------------------------------


def c0_constant(d: int, a0: float) -> float:
    """C_0 = a_0 * 2 pi^{d/2} / Gamma((d-2)/2)."""
    return a0 * 2.0 * math.pi ** (d / 2.0) / gamma((d - 2) / 2.0)


@dataclass(frozen=True)
class BoundsReport:
    lower_ok: bool
    worst_margin: float  # min over grid of u / lower_bound - 1
    b0: float
    b1_prime: float


def certify_bounds(sol: RadialSolution, a0: float, a0_err: float = 0.0) -> BoundsReport:
    """Pointwise lower bounds and fitted envelope constants.

    d >= 5: u >= (a0 - err) r^{2-d}; b0 = max_{r>=4/3} r^{d-2} u;
    b1' = max_{r>=4/3} (u - a0 r^{2-d}) r^{2d-6}.
    d = 4: u >= [2 r^2 log 2r]^{-1}; b0 = max_{r>=4/3} 2 r^2 log(r) u;
    b1' = max_{r>=16} (u - 1/(2 r^2 log r)) r^2 log(r)^2 / log log r.
    """
    r, u, d = sol.r, sol.u, sol.d
    far = r >= 4.0 / 3.0
    if d == 4:
        lower = 1.0 / (2.0 * r * r * np.log(2.0 * r))
        b0 = float(np.max(2.0 * r[far] ** 2 * np.log(r[far]) * u[far]))
        m = r >= 16.0
        lr = np.log(r[m])
        b1 = float(np.max((u[m] - 0.5 / (r[m] ** 2 * lr)) * r[m] ** 2 * lr ** 2 / np.log(lr)))
    else:
        lower = (a0 - a0_err) * r ** (2.0 - d)
        b0 = float(np.max(r[far] ** (d - 2) * u[far]))
        b1 = float(np.max((u[far] - a0 * r[far] ** (2.0 - d)) * r[far] ** (2 * d - 6)))
    ok = bool(np.all(u >= lower))
    return BoundsReport(ok, float(np.min(u / lower - 1.0)), b0, b1)


def d4_expansion_gap(sol: RadialSolution, rr) -> np.ndarray:
    """|r^2 log r u - 1/2 - loglog r / (4 log r)| for d = 4."""
    if sol.d != 4:
        raise ValueError("d = 4 only")
    rr = np.asarray(rr, dtype=np.float64)
    lr = np.log(rr)
    return np.abs(rr * rr * lr * sol.value(rr) - 0.5 - np.log(lr) / (4.0 * lr))


def d4_slope_check(sol: RadialSolution, rr, coeffs) -> list[tuple[float, float, float, float]]:
    """Compare w'(s) from the solution with the truncated rho expansion.

    w(s) = r^2 u_1(r), s = log(2 r^2), so w'(s) = (r/2) dw/dr.
    Rows: (r, w, w'(s), truncated series).
    """
    rows = []
    for x in np.atleast_1d(rr):
        x = float(x)
        u = float(sol.value(np.array([x]))[0])
        du = float(sol.derivative(np.array([x]))[0])
        w = x * x * u
        wp = 0.5 * x * (2.0 * x * u + x * x * du)
        approx, _, _ = rho_asymptotic(coeffs, w)
        rows.append((x, w, wp, approx))
    return rows


# --- u_eps and the conditioned diffusion ---------------------------------------------


def u_eps(sol: RadialSolution, y, eps: float) -> np.ndarray:
    """eps^{-2} u_1(|y|/eps); ``y`` is a point or an array of points (last axis is space)."""
    rad = np.linalg.norm(np.asarray(y, dtype=np.float64), axis=-1)
    return u_eps_radial(sol, rad, eps)


def u_eps_radial(sol: RadialSolution, rad, eps: float) -> np.ndarray:
    rad = np.asarray(rad, dtype=np.float64)
    if np.any(rad <= eps):
        raise ValueError("u_eps is infinite on the closed ball of radius eps")
    return sol.value(rad / eps) / eps ** 2


def drift(sol: RadialSolution, z, eps: float) -> np.ndarray:
    """grad u_eps / u_eps at z (relative to the ball center)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    rad = np.linalg.norm(z, axis=1)
    if np.any(rad <= eps):
        raise ValueError("drift undefined inside the ball")
    k = sol.log_derivative(rad / eps) / eps
    return (k / rad)[:, None] * z
