"""Predicted decay exponents, log-log fitting and windowing."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .diagnostics import NormSeries

GAMMA0 = 0.75

PASS = "pass"
FAIL = "fail"
OUT_OF_VALIDITY = "out-of-validity"
NO_VALID_WINDOW = "no-valid-window"


class NoValidWindow(ValueError):
    """No admissible fitting window exists for a series."""


@dataclass(frozen=True)
class ExponentQuery:
    field_kind: str
    a: float = 0.0
    b: int = 0
    p: float = 2.0

    def __post_init__(self):
        if self.field_kind not in ("u", "B", "omega"):
            raise ValueError(f"field_kind must be u, B or omega, got {self.field_kind!r}")
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be finite and >= 0, got {self.a}")
        if int(self.b) != self.b or self.b < 0:
            raise ValueError(f"b must be a non-negative integer, got {self.b}")
        if not self.p >= 2:
            raise ValueError(f"p must be >= 2 or inf, got {self.p}")


def predicted_exponent(q: ExponentQuery) -> float | None:
    """Algebraic decay exponent of ||x|^a D^b f||_{L^p}, or None when out of validity.

    Velocity estimates hold only for a < b + 5/2 (strict); magnetic field and
    vorticity estimates hold for every a >= 0. The table is the same with and
    without the Hall term.
    """
    if q.field_kind == "u" and not q.a < q.b + 2.5:
        return None
    inv_p = 0.0 if math.isinf(q.p) else 1.0 / q.p
    exponent = -GAMMA0 + 0.5 * q.a - 0.5 * q.b - 0.75 * (1.0 - 2.0 * inv_p)
    if q.field_kind == "omega":
        exponent -= 0.5
    return exponent


@dataclass(frozen=True)
class DecayFit:
    slope: float
    stderr: float
    r_squared: float
    window: tuple[float, float]
    shift: float
    n_samples: int

    def as_dict(self) -> dict:
        return asdict(self)


def fit_decay(series: NormSeries, window: Sequence[float] | None = None, t_s: float = 1.0) -> DecayFit:
    """Least-squares slope of log v against log(t + t_s) inside ``window``."""
    t, v = series.arrays()
    if window is None:
        window = (t[0], t[-1]) if len(t) else (0.0, 0.0)
    lo, hi = float(window[0]), float(window[1])
    sel = (t >= lo) & (t <= hi)
    t, v = t[sel], v[sel]
    if len(t) < 5:
        raise ValueError(f"need at least 5 samples in window [{lo:g}, {hi:g}], got {len(t)}")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("series values in the window must be positive and finite")
    if np.any(t + t_s <= 0):
        raise ValueError("t + t_s must be positive")
    x, y = np.log(t + t_s), np.log(v)
    res = stats.linregress(x, y)
    r2 = min(max(float(res.rvalue) ** 2, 0.0), 1.0)
    return DecayFit(float(res.slope), float(res.stderr), r2, (lo, hi), float(t_s), int(len(t)))


def auto_window(
    series: NormSeries,
    boundary: NormSeries,
    width: float,
    threshold: float = 1e-6,
    t_min_factor: float = 5.0,
) -> tuple[float, float]:
    """Fit window [t_min_factor * width^2, last time before boundary contamination].

    t_hi is the last sample preceding the first sample whose boundary
    fraction exceeds ``threshold``.
    """
    if not len(series):
        raise ValueError("series is empty")
    t_lo = t_min_factor * width**2
    t_hi = None
    for t, frac in zip(boundary.times, boundary.values):
        if frac > threshold:
            break
        t_hi = t
    if t_hi is None:
        raise NoValidWindow("boundary fraction exceeds threshold from the first sample")
    t_hi = min(t_hi, series.times[-1])
    if not t_hi > t_lo:
        raise NoValidWindow(f"window [{t_lo:g}, {t_hi:g}] is empty")
    return (t_lo, t_hi)


@dataclass(frozen=True)
class SupRecursionCheck:
    holds: bool
    vacuous: bool
    n_checked: int
    worst_ratio: float

    def __bool__(self) -> bool:
        return self.holds


def check_sup_recursion(series: NormSeries, gamma: float, c0: float, t_floor: float) -> SupRecursionCheck:
    """Test the dyadic sup-recursion

        sup_{[t/2, t]} F^2  <=  C0 t^(-2 gamma) + C0 t^(-gamma) sup_{[t/4, t]} F

    at every sampled t >= 4 t_floor, with sups over the available samples.
    """
    t, v = series.arrays()
    checked = [i for i, ti in enumerate(t) if ti >= 4 * t_floor]
    if not checked:
        warnings.warn("no samples with t >= 4 * t_floor; sup-recursion holds vacuously", stacklevel=2)
        return SupRecursionCheck(True, True, 0, 0.0)
    worst = 0.0
    holds = True
    for i in checked:
        ti = t[i]
        quarter = (t >= ti / 4) & (t <= ti)
        half = (t >= ti / 2) & (t <= ti)
        if np.count_nonzero(quarter) < 3:
            raise ValueError(f"fewer than 3 samples in [{ti / 4:g}, {ti:g}]")
        lhs = float(np.max(v[half])) ** 2
        rhs = c0 * ti ** (-2 * gamma) + c0 * ti ** (-gamma) * float(np.max(v[quarter]))
        ratio = lhs / rhs if rhs > 0 else math.inf
        worst = max(worst, ratio)
        if lhs > rhs:
            holds = False
    return SupRecursionCheck(holds, False, len(checked), worst)


def verdict(q: ExponentQuery, fit: DecayFit | None, tol: float, r2_min: float = 0.95) -> str:
    predicted = predicted_exponent(q)
    if predicted is None:
        return OUT_OF_VALIDITY
    if fit is None:
        return NO_VALID_WINDOW
    if abs(fit.slope - predicted) <= tol and fit.r_squared >= r2_min:
        return PASS
    return FAIL
