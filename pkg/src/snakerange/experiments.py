"""Named experiments, each producing CSV rows and pass/fail checks, plus the run manifest."""

from __future__ import annotations

import csv
import hashlib
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .ensemble import hitting_prob_mc, occupation_moment_mc
from .excursion import sample_normalized_excursion
from .geometry import (Ball, Kernel, ScalingLaw, capacity, capacity_equivalence_report, cube_neighborhood_mc,
                       cube_reference, distance_profile, energy_rows, fit_support_exponent, lebesgue_energy,
                       lebesgue_grid, normalized_energies, s_energy, scaling_rows, steiner_volume, support_volumes)
from .hitting import verify_feynman_kac
from .moments import PiecewisePolynomial, gamma_generating, h_hierarchy, window_second_moment
from .radial import c0_constant, certify_bounds, d4_expansion_gap, solve_u1, u_eps_radial
from .rng import parallel_map, stream
from .series import a0_from_series, q_seq
from .snake import PointCloud, occupation, range_cloud, run_snake
from .spinetree import sample_sbm_slice, sample_sbm_support


@dataclass(frozen=True)
class Check:
    label: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    name: str
    header: tuple
    rows: list
    checks: list
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, label: str) -> Check:
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)


def _unit(d: int, r: float) -> np.ndarray:
    x = np.zeros(d)
    x[0] = r
    return x


# --- radial solution ----------------------------------------------------------------------


def u1_constants(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    rows, checks = [], []
    for d in p["d_list"]:
        est = a0_from_series(q_seq(d, p["N"]))
        sol = solve_u1(d, h=p["h"], R_max=p["R_max"])
        rel = abs(est.a0 - sol.a0_ode) / est.a0
        bounds = certify_bounds(sol, est.a0, est.a0_error)
        rows.append((d, est.a0, est.a0_error, sol.a0_ode, rel, c0_constant(d, est.a0),
                     bounds.lower_ok, bounds.worst_margin))
        checks.append(Check(f"a0 agreement d={d}", rel <= p["rel_tol"], f"relative difference {rel:.3e}"))
        checks.append(Check(f"lower bound d={d}", bounds.lower_ok, f"min u/bound - 1 = {bounds.worst_margin:.3e}"))
    return ExperimentResult("u1-constants", ("d", "a0_series", "a0_series_err", "a0_ode", "rel_diff", "C0",
                                             "lower_bound_ok", "lower_bound_margin"), rows, checks)


def d4_asymptotics(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    sol = solve_u1(4, h=p["h"], R_max=p["R_max"])
    rr = np.array(p["r_list"])
    gap = d4_expansion_gap(sol, rr)
    lr = np.log(rr)
    value = rr * rr * lr * sol.value(rr)
    rows = [(float(r), float(v), float(g), float(5.0 / l)) for r, v, g, l in zip(rr, value, gap, lr)]
    checks = [Check(f"expansion r={r:g}", g <= 5.0 / l, f"gap {g:.3e} <= {5.0 / l:.3e}")
              for r, g, l in zip(rr, gap, lr)]
    bounds = certify_bounds(sol, 0.5)
    checks.append(Check("lower bound d=4", bounds.lower_ok, f"min u/bound - 1 = {bounds.worst_margin:.3e}"))
    return ExperimentResult("d4-asymptotics", ("r", "r2_log_r_u", "gap", "bound"), rows, checks)


# --- exact moments ------------------------------------------------------------------------


def moment_identity(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    rows, checks = [], []
    for pair in p["windows"]:
        t, T = (Fraction(s.strip()) for s in pair.split(":"))
        a = T - t
        h2 = h_hierarchy(PiecewisePolynomial.indicator(0, a), 2, T)[1]
        closed = window_second_moment(t, T)
        # on [a, inf) the second moment is the polynomial 4 a^2 s - 8 a^3 / 3 in the end time s
        last = [2 * c for c in h2.h.pieces[-1]] + [Fraction(0)] * 2
        poly_ok = last[0] == -Fraction(8, 3) * a ** 3 and last[1] == 4 * a * a and not any(last[2:])
        ok = h2.moment == closed and poly_ok
        rows.append(("moment", str(t), str(T), str(h2.moment), str(closed), "", ok))
        checks.append(Check(f"second moment t={t} T={T}", ok, f"{h2.moment} vs {closed}"))
    for lam in p["lam_list"]:
        val = gamma_generating(lam, p["N_gamma"])
        exact = 1.0 - math.sqrt(1.0 - lam)
        err = abs(val - exact)
        ok = err <= p["gamma_tol"]
        rows.append(("gamma", repr(lam), "", repr(val), repr(exact), repr(err), ok))
        checks.append(Check(f"gamma series lambda={lam:g}", ok, f"error {err:.3e}"))
    return ExperimentResult("moment-identity", ("kind", "t_or_lambda", "T", "computed", "closed_form", "error",
                                                "pass"), rows, checks)


# --- Monte Carlo against exact values -----------------------------------------------------


def occupation_mc(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    A = Ball(_unit(p["d"], p["center_norm"]), p["radius"])
    r = occupation_moment_mc(A, p["M"], stream(cfg.seed, 0), r_min=p["r_min"], r_max=p["r_max"],
                             ds=p["ds"], n_cap=p["n_cap"])
    total = r.estimate + r.lower_tail + r.upper_tail
    diff = abs(total - r.full_target)
    ok = diff <= 3.0 * r.stderr
    row = (r.estimate, r.stderr, r.lower_tail, r.upper_tail, total, r.full_target, r.window_target,
           diff / r.stderr if r.stderr > 0 else math.inf)
    return ExperimentResult("occupation-moment-mc", ("window_estimate", "stderr", "lower_tail_exact",
                                                     "upper_tail_exact", "total", "target", "window_target",
                                                     "z"), [row],
                            [Check("occupation first moment", ok, f"|{total:.5e} - {r.full_target:.5e}| "
                                   f"= {diff:.2e}, 3 stderr = {3 * r.stderr:.2e}")])


def feynman_kac(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    sol = solve_u1(p["d"])
    r = verify_feynman_kac(sol, _unit(p["d"], p["x_norm"]), p["eps"], p["T"], p["M"], stream(cfg.seed, 0),
                           eta=p["eta"])
    diff = abs(r.estimate - r.lhs)
    budget = 3.0 * r.stderr + r.tail_bound
    row = (r.lhs, r.estimate, r.stderr, r.tail_bound, diff, r.hit_fraction, r.horizon_fraction)
    return ExperimentResult("feynman-kac", ("u_eps", "estimate", "stderr", "tail_bound", "abs_diff",
                                            "hit_fraction", "horizon_fraction"), [row],
                            [Check("Feynman-Kac equality", diff <= budget, f"diff {diff:.2e} <= {budget:.2e}")])


def hitting_prob(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    sol = solve_u1(p["d"])
    rows, checks = [], []
    for k, yn in enumerate(p["y_norms"]):
        target = float(u_eps_radial(sol, np.array([yn]), p["eps"])[0])
        r = hitting_prob_mc(_unit(p["d"], yn), p["eps"], (p["h_min"], p["h_max"]), p["M"], stream(cfg.seed, k),
                            method=p["method"], eta_step=p["eta_step"], eta_graft=p["eta_graft"])
        est = r.estimate + r.lower_tail_estimate
        tol = max(3.0 * r.stderr, p["rel_tol"] * target)
        ok = abs(est - target) <= tol
        rows.append((yn, p["eps"], est, r.stderr, r.lower_tail_estimate, r.upper_tail, target, est / target))
        checks.append(Check(f"hitting probability |y|={yn:g}", ok,
                            f"{est:.5f} vs {target:.5f} (tolerance {tol:.5f})"))
    return ExperimentResult("hitting-prob", ("y_norm", "eps", "estimate", "stderr", "lower_tail_estimate",
                                             "upper_tail_bound", "target", "ratio"), rows, checks)


# --- range volumes and supports -----------------------------------------------------------


def _ise_replica(i: int, seed: int, n: int, d: int, radius: float, M: int):
    rng = stream(seed, i)
    s = run_snake(sample_normalized_excursion(n, rng), np.zeros(d), d, rng)
    occ = occupation(s)
    A = Ball(np.zeros(d), radius)
    prof = distance_profile(range_cloud(s, dedup=True), A, M, rng)
    return prof, occ.total_mass, occ.mass_in(A.contains)


def ise_range_volume(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    d = p["d"]
    est = a0_from_series(q_seq(d, 2000))
    C0 = c0_constant(d, est.a0)
    out = parallel_map(partial(_ise_replica, seed=cfg.seed, n=p["n"], d=d, radius=p["radius"], M=p["M"]),
                       range(p["realizations"]), cfg.workers)
    profiles = [o[0] for o in out]
    guard = p["guard_factor"] * max(pr.spacing for pr in profiles)
    eps = guard * np.array(p["eps_factors"])
    targets = [C0 * o[2] for o in out]
    curve = scaling_rows(profiles, targets, eps, ScalingLaw(d), p["guard_factor"])
    rows = [(c.eps, c.value, c.target, c.ratio, c.stderr, c.guarded) for c in curve]
    masses = [o[1] for o in out]
    checks = [Check("occupation mass is 1", all(m == 1.0 for m in masses), f"masses {sorted(set(masses))}")]
    dev = [abs(c.ratio - 1.0) for c in curve]
    last = curve[-1]
    checks.append(Check("range volume ratio at smallest eps", last.guarded and 0.6 <= last.ratio <= 1.4,
                        f"ratio {last.ratio:.3f} +- {last.stderr:.3f} at eps {last.eps:.4f}"))
    checks.append(Check("range volume ratio trend", all(a >= b for a, b in zip(dev, dev[1:])),
                        "ratios " + ", ".join(f"{c.ratio:.3f}" for c in curve)))
    per = np.array([[pr.volumes(eps)[k] * ScalingLaw(d).phi(eps[k]) / t for k in range(eps.size)]
                    for pr, t in zip(profiles, targets)])
    return ExperimentResult("ise-range-volume", ("eps", "value", "target", "ratio", "stderr", "guarded"), rows,
                            checks, {"per_realization_ratios": per, "guard": guard, "C0": C0})


def _support_replica(i: int, seed: int, d: int, mass: float, t: float, delta: float, radius: float,
                     eps: tuple, M: int):
    rng = stream(seed, i)
    leaves, k = sample_sbm_support(np.zeros((1, d)), [mass], t, delta, rng)
    return support_volumes(PointCloud(leaves), Ball(np.zeros(d), radius), eps, M, rng), leaves.shape[0]


def sbm_support_exponent(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    d = p["d"]
    out = parallel_map(partial(_support_replica, seed=cfg.seed, d=d, mass=p["mass"], t=p["t"], delta=p["delta"],
                               radius=p["radius"], eps=p["eps"], M=p["M"]),
                       range(p["realizations"]), cfg.workers)
    fit = fit_support_exponent([o[0] for o in out], p["eps"], d, math.sqrt(p["delta"]), p["guard_factor"])
    law = ScalingLaw(d)
    ok = abs(fit.exponent - law.support_exponent) <= p["slope_tol"]
    return ExperimentResult("sbm-support-exponent", ("eps", "scaled_volume", "stderr", "guarded"), fit.rows,
                            [Check("support exponent", ok, f"slope {fit.exponent:.3f} +- {fit.exponent_stderr:.3f}"
                                   f" vs {law.support_exponent}")],
                            {"exponent": fit.exponent, "leaves": [o[1] for o in out]})


# --- energies -----------------------------------------------------------------------------


def _occupation_energy_replica(i: int, seed: int, n: int, d: int, eps: tuple, rows: int):
    rng = stream(seed, i)
    s = run_snake(sample_normalized_excursion(n, rng), np.zeros(d), d, rng)
    mu = occupation(s).merged()
    return normalized_energies(mu, eps, d, "occupation", rows, rng), mu.total_mass


def _slice_energy_replica(i: int, seed: int, d: int, mass: float, t: float, delta: float, eps: tuple, rows: int):
    rng = stream(seed, i)
    mu, k = sample_sbm_slice(np.zeros((1, d)), [mass], t, delta, rng)
    if k == 0:
        return None
    return normalized_energies(mu, eps, d, "slice", rows, rng), mu.total_mass


def _collect(fn, want: int, workers: int, start: int = 0) -> list:
    """First ``want`` non-empty replica results in index order."""
    got, i = [], start
    while len(got) < want:
        batch = parallel_map(fn, range(i, i + want), workers)
        got.extend(b for b in batch if b is not None)
        i += want
    return got[:want]


def energy_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    d = p["d"]
    ds = 1.0 / (2 * p["n"])
    guard_occ = p["occ_guard_factor"] * ds ** 0.25
    eps_occ = tuple(float(guard_occ * f) for f in p["eps_factors"])
    occ = parallel_map(partial(_occupation_energy_replica, seed=cfg.seed, n=p["n"], d=d, eps=eps_occ,
                               rows=p["rows"]), range(p["realizations"]), cfg.workers)
    occ_rows = energy_rows([o[0] for o in occ], [o[1] for o in occ], eps_occ, d, "occupation", guard_occ)
    guard_sl = p["slice_guard_factor"] * math.sqrt(p["delta"])
    sl = _collect(partial(_slice_energy_replica, seed=cfg.seed, d=d, mass=p["mass"], t=p["t"], delta=p["delta"],
                          eps=p["slice_eps"], rows=p["slice_rows"]), p["realizations"], cfg.workers,
                  start=10 ** 6)
    sl_rows = energy_rows([o[0] for o in sl], [o[1] for o in sl], p["slice_eps"], d, "slice", guard_sl)
    rows = [("occupation",) + (r.eps, r.value, r.target, r.ratio, r.stderr, r.guarded) for r in occ_rows]
    rows += [("slice",) + (r.eps, r.value, r.target, r.ratio, r.stderr, r.guarded) for r in sl_rows]
    checks = []
    for mode, rs in (("occupation", occ_rows), ("slice", sl_rows)):
        g = [r for r in rs if r.guarded]
        last = g[-1] if g else rs[-1]
        ok = bool(g) and abs(last.ratio - 1.0) <= p["rel_tol"]
        checks.append(Check(f"{mode} energy constant", ok,
                            f"ratio {last.ratio:.3f} +- {last.stderr:.3f} at eps {last.eps:.4f}"))
    return ExperimentResult("energy-scaling", ("mode", "eps", "value", "target", "ratio", "stderr", "guarded"),
                            rows, checks)


# --- cube constants and capacities --------------------------------------------------------


def cube_constants(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    P, d, eps = p["p"], p["d"], p["eps"]
    ref = cube_reference(P, d)
    k = d - P
    vol_mc, vol_se = cube_neighborhood_mc(P, d, eps, p["M"], stream(cfg.seed, 0))
    vol = vol_mc * eps ** -k
    steiner = steiner_volume(P, d, eps) * eps ** -k
    energy = s_energy(lebesgue_grid(P, d, p["m"]), eps, cutoff=p["cutoff"]) * eps ** k
    energy_exact = lebesgue_energy(P, d, eps) * eps ** k
    rv = abs(vol / ref.volume_limit_stated - 1.0)
    re = abs(energy / ref.energy_limit - 1.0)
    rows = [("volume", vol, vol_se * eps ** -k, ref.volume_limit_stated, rv, ref.volume_limit, steiner),
            ("energy", energy, 0.0, ref.energy_limit, re, ref.energy_limit, energy_exact)]
    checks = [Check("cube volume constant", rv <= p["vol_tol"],
                    f"{vol:.4f} vs {ref.volume_limit_stated:.4f} (unit-ball value {ref.volume_limit:.4f}, "
                    f"exact at this eps {steiner:.4f})"),
              Check("cube energy constant", re <= p["energy_tol"],
                    f"{energy:.5f} vs {ref.energy_limit:.5f} (exact at this eps {energy_exact:.5f})")]
    return ExperimentResult("cube-reference", ("quantity", "numeric", "stderr", "reference", "rel_err",
                                               "limit_value", "exact_at_eps"), rows, checks)


def _grid(m: int, d: int = 2) -> np.ndarray:
    g = (np.arange(m) + 0.5) / m
    return np.array(np.meshgrid(*([g] * d), indexing="ij")).reshape(d, -1).T


def capacity_equivalence(cfg: ExperimentConfig) -> ExperimentResult:
    p = cfg.params
    kernels = [Kernel("power", b) for b in p["betas"]]
    tol = p["tol"]
    rows, checks = [], []
    rho, rc = p["rho"], p["r_cell"]
    two = PointCloud(np.array([[0.0, 0.0], [rho, 0.0]]))
    one = PointCloud(np.zeros((1, 2)))
    gaps_ok = True
    for k in kernels:
        c2 = capacity(two, k, tol, r_cell=rc)
        exact2 = 2.0 / (float(k(rc)) + float(k(rho)))
        c1 = capacity(one, k, tol, r_cell=rc)
        exact1 = 1.0 / float(k(rc))
        ok = abs(c2.cap / exact2 - 1.0) <= tol and abs(c1.cap / exact1 - 1.0) <= tol
        rows.append(("two-point " + k.name, c2.cap, exact2, c2.cap / exact2))
        rows.append(("one-point " + k.name, c1.cap, exact1, c1.cap / exact1))
        checks.append(Check(f"closed-form capacities {k.name}", ok, f"{c2.cap:.6g} vs {exact2:.6g}"))
    grid = PointCloud(_grid(p["grid_m"]))
    self_rep = capacity_equivalence_report(grid, grid, kernels, tol)
    scaled = PointCloud(2.0 * grid.points)
    scale_rep = capacity_equivalence_report(scaled, grid, kernels, tol)
    for r in self_rep.rows:
        rows.append(("grid vs grid " + r.kernel, r.cap1, r.cap2, r.ratio))
    checks.append(Check("cube self ratio", all(r.ratio == 1.0 for r in self_rep.rows),
                        ", ".join(f"{r.ratio:.6f}" for r in self_rep.rows)))
    scale_ok = True
    for r, k in zip(scale_rep.rows, kernels):
        rows.append(("scaled grid vs grid " + r.kernel, r.cap1, r.cap2, r.ratio))
        scale_ok &= abs(r.ratio / 2.0 ** k.beta - 1.0) <= 0.10
    checks.append(Check("scaling homogeneity", scale_ok, ", ".join(f"{r.ratio:.4f}" for r in scale_rep.rows)))
    rng = stream(cfg.seed, 0)
    leaves = np.zeros((0, 5))
    while leaves.shape[0] < p["support_points"]:
        leaves, _ = sample_sbm_support(np.zeros((1, 5)), [p["mass"]], p["t"], p["delta"], rng)
    leaves = np.unique(leaves, axis=0)
    supp = PointCloud(leaves[rng.choice(leaves.shape[0], p["support_points"], replace=False)])
    rep = capacity_equivalence_report(supp, grid, kernels, tol)
    for r in rep.rows:
        rows.append(("support vs grid " + r.kernel, r.cap1, r.cap2, r.ratio))
    for k in kernels:
        res = capacity(supp, k, tol)
        gaps_ok &= res.gap <= tol * res.value
    checks.append(Check("Frank-Wolfe gap", gaps_ok, f"tol {tol:g}"))
    checks.append(Check("support vs square spread", rep.spread <= p["spread_max"], f"spread {rep.spread:.3f}"))
    return ExperimentResult("capacity-equivalence", ("case", "cap1", "cap2", "ratio"), rows, checks,
                            {"spread": rep.spread})


# --- registry, CSV and manifest -----------------------------------------------------------

EXPERIMENTS = {
    "u1-constants": (u1_constants, {"d_list": (5, 6, 7), "N": 2000, "h": 1e-6, "R_max": 1e3, "rel_tol": 0.02}),
    "d4-asymptotics": (d4_asymptotics, {"r_list": (1e3, 1e4, 1e5, 1e6), "h": 1e-6, "R_max": 2e6}),
    "moment-identity": (moment_identity, {"windows": ("0:1", "1:2", "1/2:3"), "lam_list": (0.1, 0.5, 0.9),
                                          "N_gamma": 60, "gamma_tol": 1e-10}),
    "occupation-moment-mc": (occupation_mc, {"d": 5, "center_norm": 2.0, "radius": 0.5, "M": 100000,
                                             "r_min": 0.05, "r_max": 400.0, "ds": 0.005, "n_cap": 65536}),
    "feynman-kac": (feynman_kac, {"d": 5, "x_norm": 2.0, "eps": 0.5, "M": 100000, "T": 50.0, "eta": 0.005}),
    "hitting-prob": (hitting_prob, {"d": 5, "y_norms": (2.0, 3.0), "eps": 0.5, "M": 20000, "h_min": 0.1,
                                    "h_max": 1e4, "method": "spine", "eta_step": 0.02, "eta_graft": 0.05,
                                    "rel_tol": 0.10}),
    "ise-range-volume": (ise_range_volume, {"d": 5, "n": 1000000, "radius": 1.0, "realizations": 16,
                                            "M": 100000, "guard_factor": 5.0, "eps_factors": (2.0, 1.4, 1.0)}),
    "sbm-support-exponent": (sbm_support_exponent, {
        "d": 5, "mass": 4.0, "t": 1.0, "delta": 1e-5, "radius": 3.0, "realizations": 20, "M": 20000,
        "eps": tuple(float(e) for e in np.geomspace(0.3, 0.04, 7)), "guard_factor": 10.0, "slope_tol": 0.2}),
    "energy-scaling": (energy_scaling, {
        "d": 5, "n": 1000000, "realizations": 20, "rows": 400, "occ_guard_factor": 2.0,
        "eps_factors": (2.0, 1.4, 1.05), "mass": 2.0, "t": 1.0, "delta": 1e-5, "slice_rows": 300,
        "slice_eps": (0.15, 0.1, 0.07, 0.05), "slice_guard_factor": 10.0, "rel_tol": 0.15}),
    "cube-reference": (cube_constants, {"p": 2, "d": 4, "eps": 0.05, "m": 200, "M": 1000000, "cutoff": 6.0,
                                        "vol_tol": 0.03, "energy_tol": 0.05}),
    "capacity-equivalence": (capacity_equivalence, {
        "betas": (0.5, 1.0, 1.5), "tol": 1e-4, "rho": 0.3, "r_cell": 0.05, "grid_m": 45, "support_points": 2000,
        "mass": 4.0, "t": 1.0, "delta": 1e-5, "spread_max": 10.0}),
}


def experiment_names() -> list[str]:
    return list(EXPERIMENTS)


def make_config(name: str, overrides: dict[str, str] | None = None, **flags) -> ExperimentConfig:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENTS)}")
    return ExperimentConfig.build(name, EXPERIMENTS[name][1], overrides, **flags)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {cfg.name!r}; valid names: {', '.join(EXPERIMENTS)}")
    try:
        return EXPERIMENTS[cfg.name][0](cfg)
    except Exception as exc:
        raise RuntimeError(f"experiment {cfg.name} failed: {exc}") from exc


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([_cell(v) for v in row])


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    config: ExperimentConfig
    code_version: str
    wall_time: float
    checks: list
    files: dict  # file name -> sha256

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self, include_time: bool = True) -> str:
        lines = [f"experiment={self.config.name}", f"seed={self.config.seed}",
                 f"workers={self.config.workers}", f"deterministic={str(self.config.deterministic).lower()}",
                 f"code_version={self.code_version}"]
        if include_time:
            lines.append(f"wall_time={self.wall_time:.3f}")
        lines += [f"config.{k}={_cell(v) if not isinstance(v, tuple) else ','.join(map(_cell, v))}"
                  for k, v in sorted(self.config.params.items())]
        lines += [f"check.{c.label.replace(' ', '_')}={'PASS' if c.passed else 'FAIL'}" for c in self.checks]
        lines += [f"file.{name}=sha256:{digest}" for name, digest in sorted(self.files.items())]
        lines.append(f"status={'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def run(cfg: ExperimentConfig) -> tuple[ExperimentResult, RunManifest]:
    """Run one experiment, write its CSV and manifest under cfg.out_dir."""
    start = time.perf_counter()
    result = run_experiment(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.name}.csv"
    write_csv(result, csv_path)
    manifest = RunManifest(cfg, __version__, time.perf_counter() - start, result.checks,
                           {csv_path.name: sha256(csv_path)})
    # the wall time is left out in deterministic mode so reruns are byte-identical
    (out / f"{cfg.name}.manifest").write_text(manifest.to_text(include_time=not cfg.deterministic),
                                              encoding="utf-8")
    return result, manifest
