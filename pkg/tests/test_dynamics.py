import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hallmhd.dynamics import (
    HallMhdParams,
    SimState,
    SolverError,
    energy_budget,
    energy_scale,
    hall_term,
    induction_term,
    magnetic_rhs,
    max_speeds,
    nonlinear_tendencies,
    total_energy,
    velocity_rhs,
)
from hallmhd.integrator import step
from hallmhd.spectral import Field, Grid, as_physical, gradient_norm, inner, l2_norm, random_field, spectral_l2, to_spectral


def beltrami(grid, m=1, amp=1.0):
    x3 = grid.coords[2]
    return to_spectral(Field(grid, amp * oracles.vec(grid, np.sin(m * x3), np.cos(m * x3), 0.0)))


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_params_validation():
    with pytest.raises(ValueError):
        HallMhdParams(nu=0.0)
    with pytest.raises(ValueError):
        HallMhdParams(eps_hall=-1.0)
    HallMhdParams(eps_hall=0.0)


def test_state_validation(grid8, rng):
    u = random_field(grid8, rng, solenoidal=False)
    with pytest.raises(ValueError):
        SimState(u, Field.zeros(grid8, True)).validate()
    with pytest.raises(ValueError):
        SimState(Field.zeros(grid8), Field.zeros(Grid(16, 1.0)))
    with pytest.raises(ValueError):
        SimState(Field.zeros(grid8), Field.zeros(grid8), t=-1.0)
    SimState(random_field(grid8, rng), random_field(grid8, rng)).validate()


def test_zero_state_has_zero_tendencies(grid8):
    s = SimState(Field.zeros(grid8, True), Field.zeros(grid8, True))
    assert np.all(velocity_rhs(s).data == 0)
    assert np.all(magnetic_rhs(s).data == 0)
    b = energy_budget(s)
    assert (b.kinetic, b.magnetic, b.cross_transfer, b.hall_work) == (0, 0, 0, 0)


def test_beltrami_magnetic_field_exerts_no_net_force(grid16):
    B = beltrami(grid16, 2)
    nu_hat, _ = nonlinear_tendencies(grid16, np.zeros_like(B.data), B.data, 1.0)
    assert spectral_l2(grid16, nu_hat) <= 1e-11 * l2_norm(B) * gradient_norm(B)


def test_beltrami_hall_term_vanishes(grid16):
    B = beltrami(grid16, 1)
    assert spectral_l2(grid16, hall_term(B).data) <= 1e-11 * l2_norm(B)


def test_uniform_field_hall_term_vanishes(grid8):
    B = Field(grid8, oracles.vec(grid8, 1.0, -2.0, 0.5))
    assert np.max(np.abs(hall_term(B).data)) <= 1e-12


def test_hall_term_off_for_curl_free_field(grid8):
    u = beltrami(grid8)
    B = Field(grid8, oracles.vec(grid8, 0.3, 0.0, 0.0))
    a = magnetic_rhs(SimState(u, B, params=HallMhdParams(1, 1, 0.0))).data
    b = magnetic_rhs(SimState(u, B, params=HallMhdParams(1, 1, 1.0))).data
    assert np.max(np.abs(a - b)) <= 1e-14


def test_single_mode_velocity_diffuses(grid8):
    u = beltrami(grid8, 2)
    out = velocity_rhs(SimState(u, Field.zeros(grid8, True), params=HallMhdParams(nu=1.0))).data
    assert rel(out, -4.0 * u.data) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_rhs_matches_convolution_oracle(grid8, seed):
    rng = np.random.default_rng(seed)
    u, B = random_field(grid8, rng), random_field(grid8, rng)
    p = HallMhdParams(0.3, 0.2, 0.7)
    s = SimState(u, B, params=p)
    assert rel(velocity_rhs(s).data, oracles.velocity_rhs(grid8, u.data, B.data, p.nu)) <= 1e-11
    assert rel(magnetic_rhs(s).data, oracles.magnetic_rhs(grid8, u.data, B.data, p.eta, p.eps_hall)) <= 1e-11


def test_single_mode_pair_matches_oracle(grid8):
    x1, x2, x3 = grid8.coords
    u = to_spectral(Field(grid8, oracles.vec(grid8, np.sin(x2), 0.0, np.cos(x1))))
    B = to_spectral(Field(grid8, oracles.vec(grid8, 0.0, np.cos(x3), np.sin(2 * x1))))
    s = SimState(u, B, params=HallMhdParams(1.0, 1.0, 1.0))
    assert rel(velocity_rhs(s).data, oracles.velocity_rhs(grid8, u.data, B.data, 1.0)) <= 1e-11
    assert rel(magnetic_rhs(s).data, oracles.magnetic_rhs(grid8, u.data, B.data, 1.0, 1.0)) <= 1e-11


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([16, 32]))
def test_hall_neutrality_and_transfer_antisymmetry(seed, n):
    g = Grid(n, 2 * math.pi)
    rng = np.random.default_rng(seed)
    s = SimState(random_field(g, rng), random_field(g, rng))
    b = energy_budget(s)
    scale = energy_scale(s)
    assert abs(b.hall_work) <= 1e-10 * scale
    assert abs(b.cross_transfer) <= 1e-10 * scale


def test_induction_adjoint_to_lorentz(grid16, rng):
    """<B, curl(u x B)> = -<u, (curl B) x B>: the two halves of the transfer."""
    u, B = random_field(grid16, rng), random_field(grid16, rng)
    J = as_physical(Field(grid16, oracles.curl(grid16, B.data), True)).data
    lorentz = Field(grid16, np.cross(J, as_physical(B).data, axis=0))
    assert inner(B, induction_term(u, B)) == pytest.approx(-inner(u, lorentz), rel=1e-10)


def test_budget_rate_matches_energy_change(grid16, rng):
    s = SimState(random_field(grid16, rng, 0.5), random_field(grid16, rng, 0.5), params=HallMhdParams(0.1, 0.2, 1.0))
    dt = 1e-4
    # second-order one-sided difference
    de = (-3 * total_energy(s) + 4 * total_energy(step(s, dt)) - total_energy(step(s, 2 * dt))) / (2 * dt)
    assert de == pytest.approx(energy_budget(s).rate(1.0), rel=1e-3)


def test_nonfinite_state_raises(grid8, rng):
    u = random_field(grid8, rng)
    u.data[0, 1, 0, 0] = np.nan
    with pytest.raises(SolverError):
        velocity_rhs(SimState(u, Field.zeros(grid8, True)))


def test_max_speeds(grid8):
    B = beltrami(grid8, 1, amp=2.0)
    assert max_speeds(SimState(Field.zeros(grid8, True), B)) == pytest.approx((0.0, 2.0))
