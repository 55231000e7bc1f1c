"""Path functionals driven by u_eps: the conditioned diffusion that hits a ball,
the Feynman-Kac representation of u_eps, and the hitting probability of a
snake started from a given path."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radial import RadialSolution, drift, u_eps_radial


@dataclass(frozen=True)
class HittingRun:
    exit_points: np.ndarray   # position at stopping (projected on the sphere when a step crosses it)
    exited: np.ndarray        # bool per run
    exit_times: np.ndarray
    steps: int
    paths: list | None = None  # optional recorded trajectories


def simulate_hitting_diffusion(sol: RadialSolution, x0, center, eps: float, dt: float,
                               rng: np.random.Generator, max_steps: int = 10 ** 6,
                               runs: int = 1, adaptive: float = 0.01, record: bool = False) -> HittingRun:
    """Euler-Maruyama for dX = dB + grad(log u_eps)(X - center) dt until |X - center| <= eps.

    The step is ``dt`` near the ball and grows to ``adaptive * dist^2`` far
    from it (dist = distance to the sphere), so long excursions away from the
    ball stay cheap.  A step that would enter the ball is cut at the sphere.
    Runs still outside after ``max_steps`` are reported with ``exited=False``.
    """
    center = np.asarray(center, dtype=np.float64)
    d = center.size
    x = np.tile(np.asarray(x0, dtype=np.float64), (runs, 1))
    if np.any(np.linalg.norm(x - center, axis=1) <= eps):
        raise ValueError("start point must lie outside the ball")
    guard = math.sqrt(dt)
    t = np.zeros(runs)
    exited = np.zeros(runs, dtype=bool)
    idx = np.arange(runs)
    traj = [[x[i].copy()] for i in range(runs)] if record else None
    steps = 0
    while idx.size and steps < max_steps:
        steps += 1
        z = x[idx] - center
        rad = np.linalg.norm(z, axis=1)
        dist = rad - eps
        h = np.maximum(dt, adaptive * dist * dist) if adaptive else np.full(idx.size, dt)
        # keep the drift displacement below half the distance to the sphere
        b = drift(sol, z, eps)
        bn = np.linalg.norm(b, axis=1)
        h = np.minimum(h, np.maximum(dt, 0.5 * dist / np.maximum(bn, 1e-300)))
        step = b * h[:, None] + np.sqrt(h)[:, None] * rng.standard_normal((idx.size, d))
        znew = z + step
        rnew = np.linalg.norm(znew, axis=1)
        cross = rnew <= eps
        if np.any(cross):
            # intersection of the segment with the sphere
            zc, sc = z[cross], step[cross]
            A = np.sum(sc * sc, axis=1)
            B = 2.0 * np.sum(zc * sc, axis=1)
            C = np.sum(zc * zc, axis=1) - eps * eps
            lam = (-B - np.sqrt(np.maximum(B * B - 4 * A * C, 0.0))) / (2 * A)
            znew[cross] = zc + np.clip(lam, 0.0, 1.0)[:, None] * sc
            rnew[cross] = eps
        x[idx] = center + znew
        t[idx] += h
        if record:
            for k, i in enumerate(idx):
                traj[i].append(x[i].copy())
        done = rnew <= eps + guard
        exited[idx[done]] = True
        idx = idx[~done]
    paths = [np.array(p) for p in traj] if record else None
    return HittingRun(x.copy(), exited, t, steps, paths)


@dataclass(frozen=True)
class FeynmanKacResult:
    lhs: float          # u_eps(x)
    estimate: float     # 2 E[int_0^{tau ^ T} u^2 exp(-4 int u)]
    stderr: float
    tail_bound: float   # bound on the contribution after the horizon T
    hit_fraction: float
    horizon_fraction: float  # paths still running at T


def feynman_kac_paths(sol: RadialSolution, center, eps: float, T: float, M: int,
                      rng: np.random.Generator, eta: float = 0.005, kill: float = 60.0):
    """Per-path values of 2 int_0^{tau ^ T} u^2 exp(-4 int u) and tail bounds.

    Brownian motion from the origin with steps dt = eta * dist^2 (dist to the
    sphere), trapezoid rule for both integrals.  A path stops when it enters
    the ball, reaches T, or its killing weight exp(-4 int u) drops below
    exp(-kill).  The contribution after T is bounded per path by
    exp(-4 int_0^T u) u_eps(B_T - center), using u_eps >= 2 E[...].
    """
    center = np.asarray(center, dtype=np.float64)
    d = center.size
    pos = np.zeros((M, d))
    rad = np.linalg.norm(pos - center, axis=1)
    if np.any(rad <= eps):
        raise ValueError("the origin must lie outside the ball")
    u = u_eps_radial(sol, rad, eps)
    f = u * u
    t = np.zeros(M)
    I = np.zeros(M)
    acc = np.zeros(M)
    hit = np.zeros(M, dtype=bool)
    idx = np.arange(M)
    while idx.size:
        r = rad[idx]
        dt = np.minimum(eta * (r - eps) ** 2, T - t[idx])
        pn = pos[idx] + np.sqrt(dt)[:, None] * rng.standard_normal((idx.size, d))
        rn = np.linalg.norm(pn - center, axis=1)
        inside = rn <= eps
        un = np.zeros(idx.size)
        un[~inside] = u_eps_radial(sol, rn[~inside], eps)
        In = I[idx] + 0.5 * (u[idx] + un) * dt
        fn = np.where(inside, 0.0, un * un * np.exp(-4.0 * In))
        acc[idx] += 0.5 * (f[idx] + fn) * dt
        pos[idx] = pn
        rad[idx] = rn
        u[idx] = un
        I[idx] = In
        f[idx] = fn
        t[idx] += dt
        hit[idx[inside]] = True
        done = inside | (t[idx] >= T) | (4.0 * In > kill)
        idx = idx[~done]
    at_horizon = (~hit) & (t >= T) & (4.0 * I <= kill)
    tail = np.zeros(M)
    tail[at_horizon] = np.exp(-4.0 * I[at_horizon]) * u[at_horizon]
    # killed paths: remaining weight below exp(-kill) times the local u bound
    killed = (~hit) & (4.0 * I > kill)
    tail[killed] = np.exp(-4.0 * I[killed]) * u[killed]
    return 2.0 * acc, tail, hit, at_horizon


def verify_feynman_kac(sol: RadialSolution, center, eps: float, T: float, M: int,
                       rng: np.random.Generator, eta: float = 0.005) -> FeynmanKacResult:
    """Compare u_eps(center) with its Feynman-Kac Monte Carlo estimate from the origin."""
    center = np.asarray(center, dtype=np.float64)
    vals, tail, hit, horizon = feynman_kac_paths(sol, center, eps, T, M, rng, eta)
    lhs = float(u_eps_radial(sol, np.array([np.linalg.norm(center)]), eps)[0])
    return FeynmanKacResult(lhs, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(M)),
                            float(tail.mean()), float(hit.mean()), float(horizon.mean()))


def conditioned_hitting_survival(sol: RadialSolution, path_points, times, center, eps: float) -> float:
    """1 - exp(-2 int_0^{zeta ^ tau} u_eps(w(s) - center) ds) for a sampled path.

    Trapezoid rule on the samples; if the path reaches the closed ball the
    integral diverges and the probability is 1.
    """
    pts = np.atleast_2d(np.asarray(path_points, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    if pts.shape[0] < 2:
        return 0.0
    rad = np.linalg.norm(pts - np.asarray(center, dtype=np.float64), axis=1)
    if np.any(rad <= eps):
        return 1.0
    vals = u_eps_radial(sol, rad, eps)
    integral = float(np.trapezoid(vals, times))
    return float(-np.expm1(-2.0 * integral))
