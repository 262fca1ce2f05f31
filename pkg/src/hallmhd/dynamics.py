"""Right-hand sides of the incompressible Hall-MHD system with viscosity and resistivity.

    u_t = P[B.grad B - u.grad u] + nu * Lap u
    B_t = curl(u x B) - eps_hall * curl((curl B) x B) + eta * Lap B

Pressure is never solved for; the Leray projector P removes it. Every
quadratic product is formed in physical space and 2/3-dealiased before
any further differentiation. Inputs are assumed divergence-free and
2/3-truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    Field,
    Grid,
    _curl_hat,
    _div_hat,
    _leray_hat,
    as_spectral,
    fft3,
    ifft3,
    inner,
    spectral_l2,
)


class SolverError(FloatingPointError):
    """Non-finite values appeared in a tendency or state."""


@dataclass(frozen=True)
class HallMhdParams:
    nu: float = 1.0
    eta: float = 1.0
    eps_hall: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.eps_hall >= 0:
            raise ValueError(f"eps_hall must be non-negative, got {self.eps_hall}")


@dataclass(frozen=True, eq=False)
class SimState:
    """Immutable snapshot (u, B, t); both fields are stored spectrally."""

    u: Field
    B: Field
    t: float = 0.0
    params: HallMhdParams = HallMhdParams()

    def __post_init__(self):
        if self.u.grid != self.B.grid:
            raise ValueError("u and B must share a grid")
        if not self.t >= 0:
            raise ValueError(f"time must be non-negative, got {self.t}")
        object.__setattr__(self, "u", as_spectral(self.u))
        object.__setattr__(self, "B", as_spectral(self.B))

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def divergence_error(self) -> float:
        """max over u, B of ||div f|| / ||grad f|| (0 for zero fields)."""
        worst = 0.0
        for f in (self.u, self.B):
            g = spectral_l2(self.grid, f.data * np.sqrt(self.grid.k2))
            if g > 0:
                worst = max(worst, spectral_l2(self.grid, _div_hat(self.grid, f.data)) / g)
        return worst

    def validate(self, tol: float = 1e-12):
        """Raise ValueError unless u, B are divergence-free with zero mean."""
        if self.divergence_error() > tol:
            raise ValueError(f"state is not divergence-free (relative error {self.divergence_error():.3e})")
        scale = max(np.max(np.abs(self.u.data)), np.max(np.abs(self.B.data)), 1e-300)
        for name, f in (("u", self.u), ("B", self.B)):
            if np.max(np.abs(f.data[:, 0, 0, 0])) > tol * scale:
                raise ValueError(f"mean mode of {name} must be zero")

    def replace(self, **kw) -> "SimState":
        fields = dict(u=self.u, B=self.B, t=self.t, params=self.params)
        fields.update(kw)
        return SimState(**fields)


def _check_finite(name: str, *arrays: np.ndarray):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise SolverError(f"non-finite values in {name}")


def _dealiased_product_hat(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return fft3(a * b) * grid.dealias_mask


def _cross_hat(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return fft3(np.cross(a, b, axis=0)) * grid.dealias_mask


def _stress_divergence_hat(grid: Grid, u: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Spectral d_j D(B_i B_j - u_i u_j), i.e. D(B.grad B - u.grad u) for div-free fields."""
    k = grid.kvec_odd
    out = np.zeros((3, *grid.shape), dtype=complex)
    for i in range(3):
        for j in range(i, 3):
            t_hat = fft3(B[i] * B[j] - u[i] * u[j]) * grid.dealias_mask
            out[i] += 1j * k[j] * t_hat
            if j != i:
                out[j] += 1j * k[i] * t_hat
    return out


def nonlinear_tendencies(
    grid: Grid, u_hat: np.ndarray, B_hat: np.ndarray, eps_hall: float
) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear parts (no diffusion) of both tendencies, spectral arrays."""
    u = ifft3(u_hat)
    B = ifft3(B_hat)
    nu_hat = _leray_hat(grid, _stress_divergence_hat(grid, u, B))
    emf = np.cross(u, B, axis=0)
    if eps_hall:
        J = ifft3(_curl_hat(grid, B_hat))
        emf -= eps_hall * np.cross(J, B, axis=0)
    nb_hat = _curl_hat(grid, fft3(emf) * grid.dealias_mask)
    _check_finite("nonlinear tendency", nu_hat, nb_hat)
    return nu_hat, nb_hat


def velocity_rhs(s: SimState) -> Field:
    grid = s.grid
    u = ifft3(s.u.data)
    B = ifft3(s.B.data)
    out = _leray_hat(grid, _stress_divergence_hat(grid, u, B)) - s.params.nu * grid.k2 * s.u.data
    _check_finite("velocity tendency", out)
    return Field(grid, out, spectral=True)


def hall_term(B: Field) -> Field:
    """curl D((curl B) x B), spectral."""
    grid = B.grid
    b_hat = as_spectral(B).data
    J = ifft3(_curl_hat(grid, b_hat))
    out = _curl_hat(grid, _cross_hat(grid, J, ifft3(b_hat)))
    return Field(grid, out, spectral=True)


def induction_term(u: Field, B: Field) -> Field:
    """curl D(u x B), spectral."""
    grid = u.grid
    uu, bb = ifft3(as_spectral(u).data), ifft3(as_spectral(B).data)
    return Field(grid, _curl_hat(grid, _cross_hat(grid, uu, bb)), spectral=True)


def magnetic_rhs(s: SimState) -> Field:
    grid = s.grid
    out = induction_term(s.u, s.B).data - s.params.eta * grid.k2 * s.B.data
    if s.params.eps_hall:
        out = out - s.params.eps_hall * hall_term(s.B).data
    _check_finite("magnetic tendency", out)
    return Field(grid, out, spectral=True)


@dataclass(frozen=True)
class EnergyBudget:
    kinetic: float
    magnetic: float
    visc_dissipation: float
    ohmic_dissipation: float
    cross_transfer: float
    hall_work: float

    @property
    def total(self) -> float:
        return self.kinetic + self.magnetic

    def rate(self, eps_hall: float) -> float:
        """d/dt of total energy implied by the budget terms."""
        return (
            -self.visc_dissipation
            - self.ohmic_dissipation
            + self.cross_transfer
            - eps_hall * self.hall_work
        )


def energy_budget(s: SimState) -> EnergyBudget:
    grid = s.grid
    u, B = s.u, s.B
    kgrad = np.sqrt(grid.k2)
    lorentz = Field(grid, _stress_divergence_hat(grid, np.zeros((3, *grid.shape)), ifft3(B.data)), True)
    return EnergyBudget(
        kinetic=0.5 * inner(u, u),
        magnetic=0.5 * inner(B, B),
        visc_dissipation=s.params.nu * spectral_l2(grid, kgrad * u.data) ** 2,
        ohmic_dissipation=s.params.eta * spectral_l2(grid, kgrad * B.data) ** 2,
        cross_transfer=inner(u, lorentz) + inner(B, induction_term(u, B)),
        hall_work=inner(B, hall_term(B)),
    )


def energy_scale(s: SimState) -> float:
    """Natural magnitude for the transfer terms: ||f|| ||grad f|| max|f| summed."""
    grid = s.grid
    total = 0.0
    for f in (s.u, s.B):
        total += (
            spectral_l2(grid, f.data)
            * spectral_l2(grid, np.sqrt(grid.k2) * f.data)
            * float(np.max(np.abs(ifft3(f.data))))
        )
    return total


def total_energy(s: SimState) -> float:
    return 0.5 * (spectral_l2(s.grid, s.u.data) ** 2 + spectral_l2(s.grid, s.B.data) ** 2)


def max_speeds(s: SimState) -> tuple[float, float]:
    """(max|u|, max|B|) over the grid."""
    u = ifft3(s.u.data)
    B = ifft3(s.B.data)
    return (
        float(math.sqrt(np.max(np.einsum("i...,i...->...", u, u)))),
        float(math.sqrt(np.max(np.einsum("i...,i...->...", B, B)))),
    )
