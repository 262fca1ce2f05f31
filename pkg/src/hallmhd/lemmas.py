"""
Executable oracles for the generalized Gronwall lemma and the parabolic
interpolation inequality.

Gronwall setting: F: [1, inf) -> [0, inf) with

    F' <= C0 t^-a0 F + C1 t^-a1 F^b1 + C2 t^-a2 F^b2 + C3 t^(g2 - 1),   F(1) <= K0,

g_i = (1 - a_i)/(1 - b_i), g1 >= g2. The claim is F(t) <= C* t^g1.
Every admissible F is dominated by the solution of the equality ODE
(the right-hand side is nondecreasing in F), so integrating that one
extremal trajectory certifies the whole class.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .diagnostics import WeightedNormSpec, weighted_norm
from .spectral import Field

# seed for the maximal solution when K0 = 0 and a sublinear term is active
_ZERO_START = 1e-30


@dataclass(frozen=True)
class GronwallParams:
    alpha0: float
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    C0: float = 0.0
    C1: float = 0.0
    C2: float = 0.0
    C3: float = 0.0
    K0: float = 0.0

    def __post_init__(self):
        if not self.alpha0 > 1:
            raise ValueError(f"alpha0 must exceed 1, got {self.alpha0}")
        if not (self.alpha1 < 1 and self.alpha2 < 1):
            raise ValueError("alpha1 and alpha2 must be < 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        for name in ("C0", "C1", "C2", "C3", "K0"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        g1, g2 = gronwall_exponents(self)
        if not (g1 > 0 and g2 > 0):
            raise ValueError(f"exponents must be positive, got gamma1={g1}, gamma2={g2}")
        if not g1 >= g2:
            raise ValueError(f"need gamma1 >= gamma2, got {g1} < {g2}")


def gronwall_exponents(p: GronwallParams) -> tuple[float, float]:
    return (1 - p.alpha1) / (1 - p.beta1), (1 - p.alpha2) / (1 - p.beta2)


def gronwall_rhs(p: GronwallParams, t, F):
    """Right-hand side of the equality ODE (vectorized over t, F)."""
    g2 = (1 - p.alpha2) / (1 - p.beta2)
    F = np.maximum(F, 0.0)
    return (
        p.C0 * t ** (-p.alpha0) * F
        + p.C1 * t ** (-p.alpha1) * F**p.beta1
        + p.C2 * t ** (-p.alpha2) * F**p.beta2
        + p.C3 * t ** (g2 - 1)
    )


@dataclass(frozen=True)
class BoundCertificate:
    gamma1: float
    gamma2: float
    C_star: float
    t0: float
    K1: float
    K: float

    def bound(self, t):
        return self.C_star * np.asarray(t, dtype=float) ** self.gamma1

    def as_dict(self) -> dict:
        return asdict(self)


def majorant_coefficients(p: GronwallParams):
    """Linear majorant F' <= a(t) F + f(t) valid on [1, inf).

    Each sublinear term with b in (0, 1) is split by Young's inequality
    x^b y <= (b eps) x + (1 - b) eps^(-b/(1-b)) y^(1/(1-b)) with
    b eps = C0 t^-a0, so it costs one extra C0 t^-a0 F. Returns (c, f)
    with a(t) = c * C0 t^-a0.
    """
    g2 = (1 - p.alpha2) / (1 - p.beta2)
    n_split = 0
    parts = []
    for C, a, b in ((p.C1, p.alpha1, p.beta1), (p.C2, p.alpha2, p.beta2)):
        if C == 0:
            continue
        if b == 0:
            parts.append(lambda t, C=C, a=a: C * t ** (-a))
            continue
        n_split += 1
        e = b / (1 - b)

        def term(t, C=C, a=a, b=b, e=e):
            return (1 - b) * (b * t**p.alpha0 / p.C0) ** e * (C * t ** (-a)) ** (1 / (1 - b))

        parts.append(term)

    def forcing(t):
        return sum(f(t) for f in parts) + p.C3 * t ** (g2 - 1)

    return 1 + n_split, forcing


def _integrate_majorant(p: GronwallParams, t0: float, epsrel: float = 1e-10) -> float:
    """Variation of constants for the linear majorant from F(1) = K0 to t0."""
    c, forcing = majorant_coefficients(p)

    def A(t):
        return c * p.C0 * (t ** (1 - p.alpha0) - 1) / (1 - p.alpha0)

    def integrand(s):
        t = math.exp(s)
        return forcing(t) * math.exp(-A(t)) * t

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, 0.0, math.log(t0), epsabs=0.0, epsrel=epsrel, limit=500)
        except integrate.IntegrationWarning as exc:
            raise RuntimeError(f"majorant quadrature did not converge: {exc}") from exc
    return math.exp(A(t0)) * (p.K0 + val)


def gronwall_certificate(p: GronwallParams) -> BoundCertificate:
    """Constants t0, K1, K and C* = 2K from the constructive proof.

    K also includes 8 C3/g1 so the forcing term is absorbed at the
    contradiction point; without it the construction fails for C3 > 0.
    """
    g1, g2 = gronwall_exponents(p)
    t0 = max(1.0, (2 * p.C0 / g1) ** (1 / (p.alpha0 - 1))) if p.C0 > 0 else 1.0
    K1 = p.K0 if t0 == 1.0 else _integrate_majorant(p, t0)
    K = max(
        (p.C1 * 2 ** (3 + p.beta1) / g1) ** (1 / (1 - p.beta1)),
        (p.C2 * 2 ** (3 + p.beta2) / g1) ** (1 / (1 - p.beta2)),
        K1,
        8 * p.C0 / g1,
        8 * p.C3 / g1,
    )
    return BoundCertificate(g1, g2, 2 * K, t0, K1, K)


def gronwall_schedule(t_max: float, ratio: float = 2 ** (1 / 8)) -> np.ndarray:
    n = int(math.floor(math.log(t_max) / math.log(ratio) + 1e-9))
    t = ratio ** np.arange(n + 1)
    if t[-1] < t_max:
        t = np.append(t, t_max)
    return t


def gronwall_worst_case(
    p: GronwallParams, t_max: float, ratio: float = 2 ** (1 / 8), rtol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Extremal trajectory F' = RHS, F(1) = K0, sampled on a geometric schedule.

    Integrated in s = log t with DOP853. When K0 = 0 and a sublinear term
    is active the equality ODE has a non-unique zero solution; the maximal
    one is reached by starting from a negligible positive seed.
    """
    if not t_max > 1:
        raise ValueError("t_max must exceed 1")
    times = gronwall_schedule(t_max, ratio)
    F0 = p.K0
    if F0 == 0 and ((p.C1 > 0 and p.beta1 > 0) or (p.C2 > 0 and p.beta2 > 0)):
        F0 = _ZERO_START

    def rhs(s, y):
        t = math.exp(s)
        return t * gronwall_rhs(p, t, y)

    sol = integrate.solve_ivp(
        rhs,
        (0.0, math.log(t_max)),
        [F0],
        method="DOP853",
        t_eval=np.log(times),
        rtol=rtol,
        atol=1e-300,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise RuntimeError(f"worst-case integration failed: {sol.message}")
    return times, sol.y[0]


def gronwall_verify(p: GronwallParams, t_max: float, certificate: BoundCertificate | None = None) -> bool:
    """True iff the extremal trajectory stays below C* t^g1 at every sample.

    A relative slack of 1e-9 covers the integration tolerance.
    """
    cert = certificate or gronwall_certificate(p)
    t, F = gronwall_worst_case(p, t_max)
    return bool(np.all(F <= cert.bound(t) * (1 + 1e-9)))


def closed_form_extremal(p: GronwallParams, t) -> np.ndarray:
    """Exact extremal solution when only the C1 term is active."""
    if p.C0 or p.C2 or p.C3:
        raise ValueError("closed form requires C0 = C2 = C3 = 0")
    t = np.asarray(t, dtype=float)
    b, a = p.beta1, p.alpha1
    inner = (1 - b) * p.C1 * (t ** (1 - a) - 1) / (1 - a) + p.K0 ** (1 - b)
    return inner ** (1 / (1 - b))


def draw_admissible(rng: np.random.Generator, max_gamma: float = 4.0) -> GronwallParams:
    """Random parameters satisfying every hypothesis, with g1 <= max_gamma."""
    while True:
        a0 = rng.uniform(1.1, 3.0)
        a1, a2 = rng.uniform(-1.0, 0.95, size=2)
        b1, b2 = rng.uniform(0.0, 0.9, size=2)
        g1, g2 = (1 - a1) / (1 - b1), (1 - a2) / (1 - b2)
        if g1 < g2:
            a1, a2, b1, b2, g1, g2 = a2, a1, b2, b1, g2, g1
        if not (0 < g2 <= g1 <= max_gamma):
            continue
        C = rng.uniform(0.0, 2.0, size=4)
        # occasionally switch terms off to cover degenerate branches
        C[rng.random(4) < 0.15] = 0.0
        K0 = 0.0 if rng.random() < 0.1 else rng.uniform(0.0, 3.0)
        return GronwallParams(a0, a1, a2, b1, b2, *C, K0)


def gronwall_sweep(n: int, seed: int, t_max: float = 1e3) -> dict:
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for i in range(n):
        p = draw_admissible(rng)
        cert = gronwall_certificate(p)
        t, F = gronwall_worst_case(p, t_max)
        bound = cert.bound(t)
        ratio = float(np.max(F / bound)) if cert.C_star > 0 else (0.0 if np.all(F == 0) else math.inf)
        worst = max(worst, ratio)
        if ratio > 1 + 1e-9:
            failures.append({"index": i, "params": asdict(p), "ratio": ratio})
    return {"draws": n, "seed": seed, "t_max": t_max, "failures": failures, "max_ratio": worst, "passed": not failures}


def parabolic_interp_ratio(
    u_snapshots: Sequence[tuple[float, Field]],
    g_snapshots: Sequence[tuple[float, Field]],
    p: float,
    t: float,
) -> float:
    """Empirical constant needed in

        sup_{[t/2,t]} ||grad u||_p^2 <= C sup ||u||_p sup ||u_t - Lap u||_p + (C/t) sup ||u||_p^2

    with the right-hand sups over [t/4, t]; returns LHS / RHS(C = 1).
    """
    if len(u_snapshots) != len(g_snapshots):
        raise ValueError("u and g snapshots must match")
    for (tu, fu), (tg, fg) in zip(u_snapshots, g_snapshots):
        if tu != tg or fu.grid != fg.grid:
            raise ValueError("u and g snapshots must share times and grids")
    times = np.array([tau for tau, _ in u_snapshots], dtype=float)
    eps = 1e-12 * t
    quarter = (times >= t / 4 - eps) & (times <= t + eps)
    half = (times >= t / 2 - eps) & (times <= t + eps)
    if np.count_nonzero(half) < 3 or np.count_nonzero(quarter) < 3:
        raise ValueError(f"need at least 3 snapshots in [t/2, t] for t={t:g}")
    zero = WeightedNormSpec("custom", 0.0, 0, p)
    grad = WeightedNormSpec("custom", 0.0, 1, p)
    lhs = max(weighted_norm(f, grad) ** 2 for (tau, f), keep in zip(u_snapshots, half) if keep)
    u_sup = max(weighted_norm(f, zero) for (tau, f), keep in zip(u_snapshots, quarter) if keep)
    g_sup = max(weighted_norm(f, zero) for (tau, f), keep in zip(g_snapshots, quarter) if keep)
    if lhs == 0:
        return 0.0
    rhs = u_sup * g_sup + u_sup**2 / t
    return lhs / rhs
