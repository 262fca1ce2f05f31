"""Solenoidal, Gaussian-localized initial data with H^3 smallness normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import project_and_truncate
from .spectral import Field, Grid, _curl_hat, fft3, spectral_l2

KINDS = ("curl", "gaussian")


@dataclass(frozen=True)
class Blob:
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    width: float = 1.0
    amplitude: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial-data recipe.

    ``kind="curl"`` builds each field as curl(sum_b A_b exp(-|x - c_b|^2 / 2 w_b^2)),
    then Leray-projects, 2/3-truncates and rescales so that
    ||u0||_{H^3} + ||B0||_{H^3} == target_h3 (split evenly between the
    generated fields). Missing amplitudes are drawn from ``seed``.

    ``kind="gaussian"`` is the linear-solver test hook: a scalar Gaussian of
    unit peak in the first component of u (B = 0). It is not divergence-free.
    """

    blobs: tuple[Blob, ...] = (Blob(),)
    target_h3: float | None = 1e-2
    seed: int = 0
    which: str = "both"
    kind: str = "curl"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.which not in ("u", "B", "both"):
            raise ValueError(f"which must be u, B or both, got {self.which!r}")
        if not self.blobs:
            raise ValueError("at least one blob is required")
        if self.target_h3 is not None and self.target_h3 < 0:
            raise ValueError("target_h3 must be non-negative")

    @property
    def width(self) -> float:
        """Largest blob width (sets the transient cutoff of the fit window)."""
        return max(b.width for b in self.blobs)

    def check_grid(self, grid: Grid):
        half = 0.5 * grid.length
        for b in self.blobs:
            if not b.width >= 2 * grid.dx:
                raise ValueError(f"blob width {b.width} is unresolved (need >= 2 dx = {2 * grid.dx})")
            if any(abs(c) > 0.5 * half for c in b.center):
                raise ValueError(f"blob center {b.center} lies outside the central half-box")
            if any(half - abs(c) < 3 * b.width for c in b.center):
                raise ValueError(f"blob center {b.center} is closer than 3 widths to the boundary")


def h3_norm(f: Field) -> float:
    grid = f.grid
    return spectral_l2(grid, f.data * (1.0 + grid.k2) ** 1.5)


def _potential(grid: Grid, blobs, rng: np.random.Generator) -> np.ndarray:
    x1, x2, x3 = grid.coords
    psi = np.zeros((3, *grid.shape))
    for b in blobs:
        amp = np.asarray(b.amplitude, dtype=float) if b.amplitude is not None else rng.standard_normal(3)
        c = b.center
        env = np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2 + (x3 - c[2]) ** 2) / (2 * b.width**2))
        psi += amp[:, None, None, None] * env
    return psi


def generate_initial_data(spec: InitialDataSpec, grid: Grid) -> tuple[Field, Field]:
    spec.check_grid(grid)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        u = np.zeros((3, *grid.shape))
        x1, x2, x3 = grid.coords
        for b in spec.blobs:
            c = b.center
            amp = 1.0 if b.amplitude is None else float(b.amplitude[0])
            u[0] += amp * np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2 + (x3 - c[2]) ** 2) / (2 * b.width**2))
        return Field(grid, fft3(u), True), Field.zeros(grid, spectral=True)

    fields = {}
    for name in ("u", "B"):
        # draw both potentials regardless of ``which`` so a seed means the same data
        psi = _potential(grid, spec.blobs, rng)
        if spec.which in (name, "both"):
            raw = Field(grid, _curl_hat(grid, fft3(psi)), True)
            fields[name] = project_and_truncate(raw)
        else:
            fields[name] = Field.zeros(grid, spectral=True)
    if spec.target_h3 is not None:
        active = [n for n in ("u", "B") if spec.which in (n, "both")]
        share = spec.target_h3 / len(active)
        for n in active:
            norm = h3_norm(fields[n])
            if norm > 0 and math.isfinite(norm):
                fields[n] = fields[n] * (share / norm)
    return fields["u"], fields["B"]
