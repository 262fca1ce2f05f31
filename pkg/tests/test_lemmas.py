import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from hallmhd.checks import EXTREMAL_CASE, growth_exponent, parabolic_suite
from hallmhd.diagnostics import WeightedNormSpec
from hallmhd.lemmas import (
    GronwallParams,
    closed_form_extremal,
    draw_admissible,
    gronwall_certificate,
    gronwall_exponents,
    gronwall_rhs,
    gronwall_sweep,
    gronwall_verify,
    gronwall_worst_case,
    majorant_coefficients,
    parabolic_interp_ratio,
)
from hallmhd.spectral import Field, Grid

GENERIC = GronwallParams(alpha0=2.0, alpha1=0.5, alpha2=0.5, beta1=0.5, beta2=0.5, C0=1.0, C1=1.0, K0=1.0)
VORTICITY = GronwallParams(alpha0=2.0, alpha1=0.5, alpha2=0.5, beta1=0.8, beta2=0.5, C0=0.5, C1=1.0, C2=0.3, C3=0.2, K0=1.0)
MAGNETIC = GronwallParams(alpha0=1.5, alpha1=0.5, alpha2=0.5, beta1=2 / 3, beta2=0.5, C0=1.0, C1=1.0, C2=1.0, K0=2.0)


def test_exponents():
    assert gronwall_exponents(GENERIC)[0] == pytest.approx(1.0)
    # vorticity weight a = 5: alpha1 = 5/(2a), beta1 = (a-1)/a
    assert gronwall_exponents(VORTICITY)[0] == pytest.approx(2.5)
    # magnetic weight a = 3: alpha1 = 2 gamma0 / a, beta1 = (a-1)/a
    a = 3.0
    p = GronwallParams(alpha0=2.0, alpha1=2 * 0.75 / a, alpha2=0.5, beta1=(a - 1) / a, beta2=0.5)
    assert gronwall_exponents(p)[0] == pytest.approx(a - 1.5)


@pytest.mark.parametrize(
    "kw",
    [
        dict(alpha0=1.0),
        dict(alpha1=1.0),
        dict(beta1=1.0),
        dict(beta1=-0.1),
        dict(C0=-1.0),
        dict(alpha1=0.9, beta1=0.0),  # gamma1 = 0.1 < gamma2 = 1
    ],
)
def test_inadmissible_parameters(kw):
    base = dict(alpha0=2.0, alpha1=0.5, alpha2=0.5, beta1=0.5, beta2=0.5)
    base.update(kw)
    with pytest.raises(ValueError):
        GronwallParams(**base)


def test_all_constants_zero():
    p = GronwallParams(2.0, 0.5, 0.5, 0.5, 0.5, K0=3.0)
    cert = gronwall_certificate(p)
    assert cert.C_star >= 2 * p.K0
    t, F = gronwall_worst_case(p, 100.0)
    assert np.all(F == 3.0)
    assert np.all(F <= cert.bound(t))


def test_degenerate_window_without_linear_term():
    p = replace(GENERIC, C0=0.0)
    cert = gronwall_certificate(p)
    assert cert.t0 == 1.0 and cert.K1 == p.K0


def test_certificate_matches_independent_majorant_integration():
    cert = gronwall_certificate(GENERIC)
    # t0 = (2 C0 / g1)^(1/(a0-1)) = 2; Young with b = 1/2 gives F' <= 2 t^-2 F + t/4
    assert cert.t0 == pytest.approx(2.0)
    sol = solve_ivp(lambda t, y: 2 * t**-2 * y + t / 4, (1.0, 2.0), [1.0], method="DOP853", rtol=1e-13, atol=1e-14)
    assert cert.K1 == pytest.approx(sol.y[0, -1], rel=1e-8)
    # sublinear term (C1 2^(3 + b1) / g1)^(1/(1 - b1)) = 2^7 dominates 8 C0 / g1 and K1
    assert cert.K == pytest.approx(128.0)
    assert cert.C_star == 2 * cert.K


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(1.0, 1e4), F=st.floats(0.0, 1e6))
def test_majorant_dominates_rhs(seed, t, F):
    p = draw_admissible(np.random.default_rng(seed))
    if p.C0 == 0:
        return
    c, forcing = majorant_coefficients(p)
    lhs = gronwall_rhs(p, t, F)
    assert lhs <= (c * p.C0 * t ** (-p.alpha0) * F + forcing(t)) * (1 + 1e-12) + 1e-300


def test_zero_start_reaches_maximal_solution():
    p = GronwallParams(alpha0=2.0, alpha1=0.5, alpha2=0.5, beta1=0.5, beta2=0.5, C1=1.0)
    t, F = gronwall_worst_case(p, 100.0)
    assert F[-1] == pytest.approx((math.sqrt(100.0) - 1) ** 2, rel=1e-8)
    assert np.allclose(F, closed_form_extremal(p, t), rtol=1e-6, atol=1e-12)


def test_closed_form_extremal():
    t, F = gronwall_worst_case(EXTREMAL_CASE, 1e4)
    assert np.max(np.abs(F / closed_form_extremal(EXTREMAL_CASE, t) - 1)) <= 1e-8
    with pytest.raises(ValueError):
        closed_form_extremal(GENERIC, t)


@pytest.mark.parametrize("seed", range(5))
def test_shrunk_rhs_stays_below_worst_case(seed):
    rng = np.random.default_rng(seed)
    p = draw_admissible(rng)
    freq, phase = rng.uniform(0.5, 3), rng.uniform(0, 2 * math.pi)

    def shrunk(s, y):
        t = math.exp(s)
        theta = 0.5 * (1 + math.sin(freq * s + phase))
        return t * theta * gronwall_rhs(p, t, y)

    t, worst = gronwall_worst_case(p, 1e3)
    sol = solve_ivp(shrunk, (0, math.log(1e3)), [p.K0], t_eval=np.log(t), method="DOP853", rtol=1e-10, atol=1e-300)
    assert np.all(sol.y[0] <= worst * (1 + 1e-8))


@pytest.mark.parametrize("p", [GENERIC, VORTICITY, MAGNETIC], ids=["generic", "vorticity", "magnetic"])
def test_named_instances_verify(p):
    assert gronwall_verify(p, 1e4)


def test_corrupted_certificate_rejected():
    cert = gronwall_certificate(GENERIC)
    assert not gronwall_verify(GENERIC, 1e3, replace(cert, C_star=cert.C_star / 1e6))


def test_small_sweep_deterministic():
    a = gronwall_sweep(25, 7)
    b = gronwall_sweep(25, 7)
    assert a == b and a["passed"]


def test_growth_exponent():
    assert growth_exponent(EXTREMAL_CASE) == pytest.approx(2.0, abs=0.02)


def test_parabolic_ratio_zero_field():
    g = Grid(16, 8.0)
    zero = [(t, Field.zeros(g, True)) for t in (0.5, 0.75, 1.0, 1.5, 2.0)]
    assert parabolic_interp_ratio(zero, zero, 2.0, 2.0) == 0.0


def test_parabolic_ratio_needs_dense_snapshots():
    g = Grid(16, 8.0)
    zero = [(t, Field.zeros(g, True)) for t in (0.5, 2.0)]
    with pytest.raises(ValueError):
        parabolic_interp_ratio(zero, zero, 2.0, 2.0)


def test_parabolic_suite_small():
    res = parabolic_suite(sizes=(16, 32), length=16.0, t_checks=(1.0, 4.0, 16.0))
    assert res["passed"] and res["max_ratio"] < 10


def test_custom_spec_is_the_parabolic_norm():
    assert WeightedNormSpec("custom", 0, 1, 2).label == "custom_a0_b1_p2"


@pytest.mark.slow
def test_parabolic_ratio_stable_under_4x_refinement():
    # sigma = 4 keeps the blob resolved on the 16-point grid
    res = parabolic_suite(sizes=(16, 64), sigma=4.0)
    assert res["passed"] and res["max_refinement_drift"] <= 0.2
