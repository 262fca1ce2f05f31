"""
Weighted space-time norms and auxiliary diagnostics.

The central quantity is

    || w(x, t) D^b f ||_{L^p},   w = |x|^a  or  (|x|^2 + t)^(a/2),

evaluated on the grid. D^b f is the stack of d^alpha f_i over all
multi-indices |alpha| = b and components i (no multinomial weights); the
pointwise magnitude is the Euclidean norm over that stack.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, MutableMapping, Sequence

import numpy as np

from .dynamics import SimState
from .spectral import Field, _leray_hat, as_physical, as_spectral, curl, derivative_symbol, fft3, ifft3, multi_indices

FIELD_KINDS = ("u", "B", "omega", "custom")
WEIGHT_KINDS = ("centered", "shifted")


def _fmt_number(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return f"{int(v)}" if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class WeightedNormSpec:
    field_kind: str = "u"
    a: float = 0.0
    b: int = 0
    p: float = 2.0
    weight_kind: str = "centered"

    def __post_init__(self):
        if self.field_kind not in FIELD_KINDS:
            raise ValueError(f"field_kind must be one of {FIELD_KINDS}, got {self.field_kind!r}")
        if self.weight_kind not in WEIGHT_KINDS:
            raise ValueError(f"weight_kind must be one of {WEIGHT_KINDS}, got {self.weight_kind!r}")
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ValueError(f"weight exponent a must be finite and >= 0, got {self.a}")
        if int(self.b) != self.b or self.b < 0:
            raise ValueError(f"derivative order b must be a non-negative integer, got {self.b}")
        if not self.p >= 2:
            raise ValueError(f"Lebesgue exponent p must be >= 2 or inf, got {self.p}")
        object.__setattr__(self, "b", int(self.b))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "p", float(self.p))

    @property
    def label(self) -> str:
        """CSV column name, e.g. ``B_a1_b0_p2`` or ``u_a0_b1_pinf_shifted``."""
        name = f"{self.field_kind}_a{_fmt_number(self.a)}_b{self.b}_p{_fmt_number(self.p)}"
        return name + ("_shifted" if self.weight_kind == "shifted" else "")

    @classmethod
    def from_label(cls, label: str) -> "WeightedNormSpec":
        m = re.fullmatch(r"(u|B|omega|custom)_a([0-9.eE+-]+)_b(\d+)_p(inf|[0-9.eE+-]+)(_shifted)?", label.strip())
        if not m:
            raise ValueError(f"not a weighted-norm label: {label!r}")
        kind, a, b, p, shifted = m.groups()
        return cls(kind, float(a), int(b), float(p), "shifted" if shifted else "centered")


def weight(grid, spec: WeightedNormSpec, t: float = 0.0) -> np.ndarray | float:
    if spec.a == 0:
        return 1.0
    if spec.weight_kind == "centered":
        return grid.r2 ** (0.5 * spec.a)
    return (grid.r2 + t) ** (0.5 * spec.a)


def derivative_stack_magnitude(f: Field, b: int) -> np.ndarray:
    """Pointwise Euclidean norm of the stack {d^alpha f_i : |alpha| = b}."""
    if b == 0:
        phys = as_physical(f).data
        return np.sqrt(np.einsum("i...,i...->...", phys, phys))
    fs = as_spectral(f).data
    acc = np.zeros(f.grid.shape)
    for alpha in multi_indices(b):
        d = ifft3(fs * derivative_symbol(f.grid, alpha))
        acc += np.einsum("i...,i...->...", d, d)
    return np.sqrt(acc)


def weighted_norm(f: Field, spec: WeightedNormSpec, t: float = 0.0) -> float:
    grid = f.grid
    mag = derivative_stack_magnitude(f, spec.b) * weight(grid, spec, t)
    if math.isinf(spec.p):
        return float(np.max(mag))
    p = spec.p
    if p == 2:
        return math.sqrt(float(np.sum(mag * mag)) * grid.cell_volume)
    # scale before powering to stay clear of overflow
    peak = float(np.max(mag))
    if peak == 0:
        return 0.0
    return peak * float(np.sum((mag / peak) ** p) * grid.cell_volume) ** (1.0 / p)


def vorticity(s: SimState) -> Field:
    return curl(s.u)


def pressure_diagnostic(s: SimState) -> np.ndarray:
    """Total pressure pi = R_i R_j (u_i u_j - B_i B_j) on the grid (zero mean).

    The Riesz symbol is -i k_j/|k|, so pi_hat = -(k_i k_j/|k|^2) FT(u_i u_j - B_i B_j);
    products are 2/3-dealiased before transforming.
    """
    grid = s.grid
    u, B = ifft3(s.u.data), ifft3(s.B.data)
    k = grid.kvec_odd
    acc = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        for j in range(i, 3):
            q_hat = fft3(u[i] * u[j] - B[i] * B[j]) * grid.dealias_mask
            acc += (1.0 if i == j else 2.0) * k[i] * k[j] * q_hat
    pi_hat = -acc * grid.inv_k2_odd
    pi_hat[0, 0, 0] = 0.0
    return ifft3(pi_hat)


def boundary_fraction(f: Field, shell: float = 0.1) -> float:
    """Fraction of the L^2 mass of ``f`` in {max_i |x_i| > (1 - shell) L/2}."""
    grid = f.grid
    phys = as_physical(f).data
    dens = np.einsum("i...,i...->...", phys, phys)
    total = float(np.sum(dens))
    if total == 0:
        return 0.0
    inner_1d = np.abs(grid.x) <= (1.0 - shell) * 0.5 * grid.length
    inside = inner_1d[:, None, None] & inner_1d[None, :, None] & inner_1d[None, None, :]
    return float(np.sum(dens[~inside])) / total


@dataclass
class NormSeries:
    """Ordered (t, value) samples of one diagnostic."""

    name: str
    spec: WeightedNormSpec | None = None
    times: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, t: float, value: float):
        if self.times and not t > self.times[-1]:
            raise ValueError(f"times must be strictly increasing ({t} after {self.times[-1]})")
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"series values must be finite and >= 0, got {value}")
        self.times.append(float(t))
        self.values.append(float(value))

    def __len__(self) -> int:
        return len(self.times)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times, dtype=float), np.asarray(self.values, dtype=float)

    def ratio(self, other: "NormSeries") -> "NormSeries":
        """Elementwise self/other on the common sample times."""
        if self.times != other.times:
            raise ValueError("series are sampled at different times")
        vals = [a / b if b > 0 else float("nan") for a, b in zip(self.values, other.values)]
        out = NormSeries(f"{self.name}/{other.name}", None, list(self.times), [], dict(self.meta))
        out.values = vals
        return out


BOUNDARY_U = "boundary_u"
BOUNDARY_B = "boundary_B"


def resolve_field(s: SimState, kind: str) -> Field:
    if kind == "u":
        return s.u
    if kind == "B":
        return s.B
    if kind == "omega":
        return vorticity(s)
    raise ValueError(f"cannot resolve field kind {kind!r} from a simulation state")


def record_norms(
    s: SimState,
    specs: Sequence[WeightedNormSpec],
    sink: MutableMapping[str, NormSeries],
    shell: float = 0.1,
) -> MutableMapping[str, NormSeries]:
    """Append one sample per spec plus the u/B boundary fractions."""
    cache: dict[str, Field] = {}
    for spec in specs:
        if spec.field_kind not in cache:
            cache[spec.field_kind] = resolve_field(s, spec.field_kind)
        series = sink.setdefault(spec.label, NormSeries(spec.label, spec))
        series.append(s.t, weighted_norm(cache[spec.field_kind], spec, s.t))
    for name, f in ((BOUNDARY_U, s.u), (BOUNDARY_B, s.B)):
        sink.setdefault(name, NormSeries(name)).append(s.t, boundary_fraction(f, shell))
    return sink


def project_and_truncate(f: Field) -> Field:
    """Leray projection followed by 2/3 truncation (initial-data cleanup)."""
    fs = as_spectral(f)
    return Field(f.grid, _leray_hat(f.grid, fs.data) * f.grid.dealias_mask, spectral=True)


def series_table(series: Mapping[str, NormSeries]) -> tuple[list[float], dict[str, list[float]]]:
    """Common time axis and columns; raises if the series are misaligned."""
    names = list(series)
    if not names:
        return [], {}
    times = series[names[0]].times
    for n in names[1:]:
        if series[n].times != times:
            raise ValueError(f"series {n!r} is not aligned with {names[0]!r}")
    return list(times), {n: list(series[n].values) for n in names}
