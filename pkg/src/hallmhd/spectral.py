"""
Periodic-box spectral core.

Provides the cubic periodic grid, the ``Field`` container for 3-component
vector fields, forward/inverse FFTs, spectral calculus (derivatives, curl,
divergence, Laplacian), the Leray projector and 2/3-rule dealiasing.

Conventions:
    - Physical coordinates are centered: x_j = -L/2 + j*dx.
    - Forward transforms are unnormalized (scipy.fft default), so
      f(x) = N^-3 * sum_k f_hat(k) exp(i k.x).
    - First-order (odd) derivatives drop the Nyquist wavenumber so that
      real fields stay real; even-order factors keep it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterator

import numpy as np
import scipy.fft as sfft

AXES = (-3, -2, -1)


@dataclass(frozen=True)
class Grid:
    """Cubic periodic box of edge ``length`` with ``n`` points per dimension."""

    n: int
    length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        """1D centered coordinates; x[0] == -L/2 exactly."""
        return -0.5 * self.length + np.arange(self.n) * self.dx

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in DFT order, m in [-N/2, N/2)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def k(self) -> np.ndarray:
        """1D wavenumbers 2*pi*m/L in DFT order."""
        return 2.0 * np.pi * self.modes / self.length

    @cached_property
    def k_odd(self) -> np.ndarray:
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    def _broadcast(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (v[:, None, None], v[None, :, None], v[None, None, :])

    @cached_property
    def kvec(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._broadcast(self.k)

    @cached_property
    def kvec_odd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._broadcast(self.k_odd)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 including the Nyquist wavenumber (Laplacian symbol)."""
        k1, k2, k3 = self.kvec
        return k1**2 + k2**2 + k3**2

    @cached_property
    def k2_odd(self) -> np.ndarray:
        k1, k2, k3 = self.kvec_odd
        return k1**2 + k2**2 + k3**2

    @cached_property
    def inv_k2_odd(self) -> np.ndarray:
        k2 = self.k2_odd
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where every |m_i| <= N/3 (2/3 rule)."""
        keep = 3 * np.abs(self.modes) <= self.n
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._broadcast(self.x)

    @cached_property
    def r2(self) -> np.ndarray:
        """|x|^2 measured from the box center."""
        x1, x2, x3 = self.coords
        return x1**2 + x2**2 + x3**2


def make_grid(n: int, length: float) -> Grid:
    return Grid(n, float(length))


@dataclass(frozen=True, eq=False)
class Field:
    """Three-component vector field on ``grid``.

    ``data`` has shape (3, N, N, N); it holds real samples when
    ``spectral`` is False and unnormalized FFT coefficients otherwise.
    """

    grid: Grid
    data: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        if self.data.shape != (3, *self.grid.shape):
            raise ValueError(f"field data must have shape {(3, *self.grid.shape)}, got {self.data.shape}")

    @classmethod
    def zeros(cls, grid: Grid, spectral: bool = False) -> "Field":
        dtype = complex if spectral else float
        return cls(grid, np.zeros((3, *grid.shape), dtype=dtype), spectral)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.data[i]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.data)

    def _like(self, data: np.ndarray) -> "Field":
        return Field(self.grid, data, self.spectral)

    def __add__(self, other: "Field") -> "Field":
        _check_pair(self, other)
        return self._like(self.data + other.data)

    def __sub__(self, other: "Field") -> "Field":
        _check_pair(self, other)
        return self._like(self.data - other.data)

    def __mul__(self, c: float) -> "Field":
        return self._like(self.data * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self._like(-self.data)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))


def _check_pair(f: Field, g: Field):
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if f.spectral != g.spectral:
        raise ValueError("fields have different representations")


def fft3(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, axes=AXES)


def ifft3(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, axes=AXES).real


def to_spectral(f: Field) -> Field:
    if f.spectral:
        raise ValueError("field is already spectral")
    return Field(f.grid, fft3(f.data), spectral=True)


def to_physical(f: Field) -> Field:
    if not f.spectral:
        raise ValueError("field is already physical")
    return Field(f.grid, ifft3(f.data), spectral=False)


def as_spectral(f: Field) -> Field:
    return f if f.spectral else to_spectral(f)


def as_physical(f: Field) -> Field:
    return to_physical(f) if f.spectral else f


def derivative_symbol(grid: Grid, alpha: tuple[int, int, int]) -> np.ndarray:
    """Spectral multiplier prod_j (i k_j)^alpha_j, broadcastable to (N, N, N)."""
    if len(alpha) != 3 or any(int(a) != a or a < 0 for a in alpha):
        raise ValueError(f"alpha must be a 3-tuple of non-negative integers, got {alpha}")
    sym = np.ones((1, 1, 1), dtype=complex)
    for j, a in enumerate(alpha):
        if a == 0:
            continue
        kj = (grid.kvec_odd if a % 2 else grid.kvec)[j]
        sym = sym * (1j * kj) ** a
    return sym


def derivative(f: Field, alpha: tuple[int, int, int]) -> Field:
    """Apply d^alpha to every component; returns a spectral field."""
    fs = as_spectral(f)
    return Field(f.grid, fs.data * derivative_symbol(f.grid, tuple(alpha)), spectral=True)


def multi_indices(order: int) -> list[tuple[int, int, int]]:
    """All 3D multi-indices with |alpha| == order, lexicographically descending."""
    if order < 0:
        raise ValueError("derivative order must be non-negative")
    return [a for a in product(range(order, -1, -1), repeat=3) if sum(a) == order]


def laplacian(f: Field) -> Field:
    fs = as_spectral(f)
    return Field(f.grid, -f.grid.k2 * fs.data, spectral=True)


def _curl_hat(grid: Grid, a: np.ndarray) -> np.ndarray:
    k1, k2, k3 = grid.kvec_odd
    return 1j * np.stack(
        [k2 * a[2] - k3 * a[1], k3 * a[0] - k1 * a[2], k1 * a[1] - k2 * a[0]]
    )


def _div_hat(grid: Grid, a: np.ndarray) -> np.ndarray:
    k1, k2, k3 = grid.kvec_odd
    return 1j * (k1 * a[0] + k2 * a[1] + k3 * a[2])


def _leray_hat(grid: Grid, a: np.ndarray) -> np.ndarray:
    k = grid.kvec_odd
    kdota = (k[0] * a[0] + k[1] * a[1] + k[2] * a[2]) * grid.inv_k2_odd
    return np.stack([a[i] - k[i] * kdota for i in range(3)])


def curl(f: Field) -> Field:
    fs = as_spectral(f)
    return Field(f.grid, _curl_hat(f.grid, fs.data), spectral=True)


def divergence(f: Field) -> np.ndarray:
    """Spectral coefficients of div f, shape (N, N, N)."""
    return _div_hat(f.grid, as_spectral(f).data)


def leray_project(f: Field) -> Field:
    """Project onto divergence-free fields; the k=0 mode passes through."""
    fs = as_spectral(f)
    return Field(f.grid, _leray_hat(f.grid, fs.data), spectral=True)


def dealias(f: Field) -> Field:
    if not f.spectral:
        raise ValueError("dealias expects a spectral field")
    return Field(f.grid, f.data * f.grid.dealias_mask, spectral=True)


def cross(f: Field, g: Field) -> Field:
    """Pointwise cross product in physical space."""
    a, b = as_physical(f).data, as_physical(g).data
    return Field(f.grid, np.cross(a, b, axis=0), spectral=False)


def inner(f: Field, g: Field) -> float:
    """L^2(box) inner product <f, g> = integral f.g dx, any representation."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    grid = f.grid
    if f.spectral and g.spectral:
        s = np.vdot(g.data, f.data).real
        return float(s * grid.cell_volume / grid.n**3)
    a, b = as_physical(f).data, as_physical(g).data
    return float(np.sum(a * b) * grid.cell_volume)


def l2_norm(f: Field) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def spectral_l2(grid: Grid, a_hat: np.ndarray) -> float:
    """L^2(box) norm of any stack of spectral coefficient lattices."""
    return math.sqrt(float(np.vdot(a_hat, a_hat).real) * grid.cell_volume / grid.n**3)


def gradient_norm(f: Field) -> float:
    """||grad f||_{L^2} summed over components."""
    fs = as_spectral(f)
    return spectral_l2(f.grid, fs.data * np.sqrt(f.grid.k2))


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    solenoidal: bool = True,
    truncate: bool = True,
    max_mode: int | None = None,
) -> Field:
    """Random real field with zero mean, returned in spectral form.

    ``max_mode`` additionally restricts support to |m_i| <= max_mode.
    The result is rescaled so that max |f| == amplitude.
    """
    phys = rng.standard_normal((3, *grid.shape))
    a = fft3(phys)
    a[:, 0, 0, 0] = 0.0
    if truncate:
        a *= grid.dealias_mask
    if max_mode is not None:
        keep = np.abs(grid.modes) <= max_mode
        a *= (keep[:, None, None] & keep[None, :, None] & keep[None, None, :])
    if solenoidal:
        a = _leray_hat(grid, a)
    peak = np.max(np.abs(ifft3(a)))
    if peak > 0:
        a *= amplitude / peak
    return Field(grid, a, spectral=True)
