"""Self-contained verification suites behind ``oracle-heat`` and ``verify-lemmas``."""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
from scipy import stats

from .decay import fit_decay
from .diagnostics import NormSeries, WeightedNormSpec, weighted_norm
from .dynamics import HallMhdParams, SimState, energy_budget, energy_scale, hall_term
from .heat import periodic_l2_norm, periodic_weighted_norm_on_grid
from .initial_data import Blob, InitialDataSpec, generate_initial_data
from .integrator import StepControl, geometric_schedule, integrate, stable_dt, step
from .lemmas import (
    GronwallParams,
    closed_form_extremal,
    gronwall_certificate,
    gronwall_exponents,
    gronwall_sweep,
    gronwall_verify,
    gronwall_worst_case,
    parabolic_interp_ratio,
)
from .spectral import (
    Field,
    Grid,
    as_physical,
    curl,
    derivative,
    divergence,
    inner,
    l2_norm,
    leray_project,
    random_field,
    spectral_l2,
)

HEAT_EXPONENTS = {0: -0.75, 1: -0.25, 2: 0.25}


def run_heat_oracle(
    n: int = 64,
    length: float = 32.0,
    sigma: float = 1.0,
    nu: float = 1.0,
    t_end: float = 24.0,
    t0: float = 0.25,
    ratio: float = 2.0**0.25,
    window: tuple[float, float] = (5.0, 24.0),
    slope_tol: float = 0.02,
) -> dict:
    """Linear-only solver run of a scalar Gaussian against the periodized closed form.

    Also fits the a = 0, 1, 2 slopes on ``window`` with shift sigma^2/(2 nu),
    the time offset of the Gaussian's own heat clock.
    """
    started = time.perf_counter()
    grid = Grid(n, length)
    spec = InitialDataSpec(blobs=(Blob((0.0, 0.0, 0.0), sigma),), target_h3=None, kind="gaussian")
    u0, B0 = generate_initial_data(spec, grid)
    params = HallMhdParams(nu, nu, 0.0)
    schedule = geometric_schedule(t0, t_end, ratio)
    control = StepControl(dt_max=0.1, schedule=schedule)
    specs = {a: WeightedNormSpec("custom", float(a), 0, 2.0) for a in HEAT_EXPONENTS}
    series = {a: NormSeries(f"heat_a{a}", specs[a]) for a in HEAT_EXPONENTS}
    errors = {a: 0.0 for a in HEAT_EXPONENTS}

    def observe(s: SimState):
        for a, spec in specs.items():
            val = weighted_norm(s.u, spec)
            exact = periodic_l2_norm(length, sigma, s.t, nu) if a == 0 else periodic_weighted_norm_on_grid(grid, a, sigma, s.t, nu)
            errors[a] = max(errors[a], abs(val - exact) / exact)
            series[a].append(s.t, val)

    integrate(SimState(u0, B0, 0.0, params), t_end, control, [observe], linear_only=True)
    shift = sigma**2 / (2 * nu)
    slopes = {}
    for a, target in HEAT_EXPONENTS.items():
        fit = fit_decay(series[a], window, shift)
        slopes[a] = {"fitted": fit.slope, "target": target, "r2": fit.r_squared, "passed": bool(abs(fit.slope - target) <= slope_tol)}
    tol = {0: 1e-6, 1: 1e-4, 2: 1e-4}
    norms = {a: {"max_rel_error": errors[a], "tol": tol[a], "passed": bool(errors[a] <= tol[a])} for a in HEAT_EXPONENTS}
    return {
        "grid": {"n": n, "l": length},
        "sigma": sigma,
        "snapshots": len(schedule),
        "window": list(window),
        "shift": shift,
        "norms": {str(a): v for a, v in norms.items()},
        "slopes": {str(a): v for a, v in slopes.items()},
        "wall_seconds": time.perf_counter() - started,
        "passed": all(v["passed"] for v in norms.values()) and all(v["passed"] for v in slopes.values()),
    }


def growth_exponent(p: GronwallParams, t_lo: float = 1e2, t_hi: float = 1e4) -> float:
    """Log-log slope of the extremal trajectory over [t_lo, t_hi]."""
    t, F = gronwall_worst_case(p, t_hi)
    keep = t >= t_lo
    return float(stats.linregress(np.log(t[keep]), np.log(F[keep])).slope)


# exercised by the closed-form and growth checks: only the C1 term active, g1 = 2
EXTREMAL_CASE = GronwallParams(alpha0=2.0, alpha1=0.0, alpha2=0.5, beta1=0.5, beta2=0.5, C1=1.0, K0=1.0)


def gronwall_suite(n_draws: int = 1000, seed: int = 0, t_max: float = 1e3) -> dict:
    started = time.perf_counter()
    sweep = gronwall_sweep(n_draws, seed, t_max)

    p = EXTREMAL_CASE
    t, F = gronwall_worst_case(p, 1e4)
    exact = closed_form_extremal(p, t)
    cf_err = float(np.max(np.abs(F - exact) / exact))
    g1, _ = gronwall_exponents(p)
    slope = growth_exponent(p)

    # a certificate with C* shrunk below the extremal trajectory must be rejected
    cert = gronwall_certificate(p)
    shrunk = replace(cert, C_star=0.5 * float(np.min(F / t**cert.gamma1)))
    corrupted_rejected = not gronwall_verify(p, 1e4, shrunk)

    return {
        "sweep": sweep,
        "closed_form": {"max_rel_error": cf_err, "tol": 1e-8, "passed": cf_err <= 1e-8},
        "growth_exponent": {"fitted": slope, "gamma1": g1, "tol": 0.02, "passed": abs(slope - g1) <= 0.02},
        "negative_control": {"corrupted_certificate_rejected": corrupted_rejected},
        "wall_seconds": time.perf_counter() - started,
        "passed": sweep["passed"] and cf_err <= 1e-8 and abs(slope - g1) <= 0.02 and corrupted_rejected,
    }


def _heat_snapshots(grid: Grid, sigma: float, times, nu: float = 1.0):
    """Exact spectral heat evolution of a curl-Gaussian (any grid, same data)."""
    spec = InitialDataSpec(blobs=(Blob((0.0, 0.0, 0.0), sigma, (1.0, -0.5, 0.25)),), target_h3=None)
    u0, _ = generate_initial_data(replace(spec, which="u"), grid)
    return [(t, Field(grid, u0.data * np.exp(-nu * grid.k2 * t), True)) for t in times]


def parabolic_suite(
    sizes: tuple[int, int] = (32, 64),
    length: float = 32.0,
    sigma: float = 2.0,
    p: float = 2.0,
    t_checks=(1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0),
    bound: float = 10.0,
    stability: float = 0.2,
) -> dict:
    """Empirical constant of the parabolic interpolation inequality.

    Two evolutions per grid: free heat flow H (g = 0) and the manufactured
    profile v = H cos t with residual g = v_t - Lap v = -H sin t.
    """
    times = geometric_schedule(0.25, max(t_checks), 2 ** (1 / 8))
    results = {}
    for n in sizes:
        grid = Grid(n, length)
        heat = _heat_snapshots(grid, sigma, times)
        zero = [(t, Field.zeros(grid, spectral=True)) for t, _ in heat]
        forced = [(t, f * math.cos(t)) for t, f in heat]
        resid = [(t, f * -math.sin(t)) for t, f in heat]
        results[n] = {
            "free": [parabolic_interp_ratio(heat, zero, p, t) for t in t_checks],
            "forced": [parabolic_interp_ratio(forced, resid, p, t) for t in t_checks],
        }
    coarse, fine = results[sizes[0]], results[sizes[1]]
    worst = max(max(v) for r in results.values() for v in r.values())
    drift = max(abs(c - f) / f for case in ("free", "forced") for c, f in zip(coarse[case], fine[case]) if f > 0)
    return {
        "t": list(t_checks),
        "ratios": {str(n): r for n, r in results.items()},
        "max_ratio": worst,
        "bound": bound,
        "max_refinement_drift": drift,
        "stability_tol": stability,
        "passed": worst <= bound and drift <= stability,
    }


def verify_lemmas(n_draws: int = 1000, seed: int = 0) -> dict:
    g = gronwall_suite(n_draws, seed)
    par = parabolic_suite()
    return {"gronwall": g, "parabolic": par, "passed": g["passed"] and par["passed"]}


def _rel(err: float, scale: float) -> float:
    return float(err / scale if scale > 0 else err)


def invariant_draw(grid: Grid, rng: np.random.Generator, eps_hall: float = 1.0) -> dict:
    """Worst relative residual of each structural identity on one random draw."""
    f = random_field(grid, rng, solenoidal=False)
    g = random_field(grid, rng, solenoidal=False)
    u = random_field(grid, rng)
    B = random_field(grid, rng)
    out = {}

    phys = as_physical(f)
    out["parseval"] = _rel(abs(inner(phys, phys) - inner(f, f)), inner(f, f))
    scale = l2_norm(f) * l2_norm(g) * max(grid.k.max(), 1.0)
    adj = abs(inner(derivative(f, (1, 0, 0)), g) + inner(f, derivative(g, (1, 0, 0))))
    adj = max(adj, abs(inner(curl(f), g) - inner(f, curl(g))))
    out["adjointness"] = _rel(adj, scale)

    pf, pg = leray_project(f), leray_project(g)
    out["leray_idempotent"] = _rel(spectral_l2(grid, leray_project(pf).data - pf.data), l2_norm(f))
    out["leray_self_adjoint"] = _rel(abs(inner(pf, g) - inner(f, pg)), l2_norm(f) * l2_norm(g))
    out["div_curl"] = _rel(spectral_l2(grid, divergence(curl(f))), spectral_l2(grid, curl(f).data) * grid.k.max())

    s = SimState(u, B, 0.0, HallMhdParams(0.05, 0.05, eps_hall))
    s1 = step(s, 0.5 * stable_dt(s, StepControl()))
    out["divergence_preserved"] = float(s1.divergence_error())

    hall = hall_term(B)
    out["hall_neutral"] = _rel(abs(inner(B, hall)), l2_norm(B) * spectral_l2(grid, np.sqrt(grid.k2) * B.data) * float(np.max(np.abs(as_physical(B).data))))
    budget = energy_budget(s)
    out["cross_antisymmetry"] = _rel(abs(budget.cross_transfer), energy_scale(s))
    return out


INVARIANT_TOL = {
    "parseval": 1e-12,
    "adjointness": 1e-12,
    "leray_idempotent": 1e-12,
    "leray_self_adjoint": 1e-12,
    "div_curl": 1e-12,
    "divergence_preserved": 1e-12,
    "hall_neutral": 1e-10,
    "cross_antisymmetry": 1e-10,
}


def invariant_suite(draws_per_size: int = 50, sizes=(16, 32), seed: int = 0, length: float = 2 * math.pi) -> dict:
    rng = np.random.default_rng(seed)
    started = time.perf_counter()
    worst = dict.fromkeys(INVARIANT_TOL, 0.0)
    n_draws = 0
    for n in sizes:
        grid = Grid(n, length)
        for _ in range(draws_per_size):
            for name, v in invariant_draw(grid, rng).items():
                worst[name] = max(worst[name], v)
            n_draws += 1
    checks = {k: {"worst": worst[k], "tol": INVARIANT_TOL[k], "passed": bool(worst[k] <= INVARIANT_TOL[k])} for k in worst}
    return {
        "draws": n_draws,
        "sizes": list(sizes),
        "checks": checks,
        "wall_seconds": time.perf_counter() - started,
        "passed": all(c["passed"] for c in checks.values()),
    }


def self_convergence(
    n: int = 32,
    t_end: float = 0.2,
    dt0: float = 0.02,
    refinements: int = 3,
    seed: int = 3,
    params: HallMhdParams = HallMhdParams(0.05, 0.05, 1.0),
    amplitude: float = 1.0,
) -> dict:
    """Observed order of the full nonlinear stepper from dt0, dt0/2, ..., dt0/2^refinements.

    order_i = log2(||y_i - y_{i+1}|| / ||y_{i+1} - y_{i+2}||) in L^2.
    """
    grid = Grid(n, 2 * math.pi)
    rng = np.random.default_rng(seed)
    s0 = SimState(random_field(grid, rng, amplitude), random_field(grid, rng, amplitude), 0.0, params)
    finals = []
    for r in range(refinements + 1):
        dt = dt0 / 2**r
        s = s0
        for _ in range(int(round(t_end / dt))):
            s = step(s, dt)
        finals.append(np.concatenate([s.u.data, s.B.data]))
    diffs = [spectral_l2(grid, finals[i] - finals[i + 1]) for i in range(refinements)]
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(refinements - 1)]
    return {"dt0": dt0, "t_end": t_end, "differences": diffs, "orders": orders, "passed": bool(min(orders) >= 3.5)}
