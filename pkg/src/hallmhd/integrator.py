"""Integrating-factor RK4 time stepping with CFL/whistler step control."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dynamics import SimState, SolverError, max_speeds, nonlinear_tendencies
from .spectral import Field

log = logging.getLogger(__name__)

EPS_SMALL = 1e-300

Observer = Callable[[SimState], None]


def geometric_schedule(t0: float, t_end: float, ratio: float = 2.0**0.25, include_end: bool = True) -> tuple[float, ...]:
    """Times t0 * ratio**j up to t_end (and t_end itself if ``include_end``)."""
    if not (t0 > 0 and ratio > 1):
        raise ValueError("geometric schedule needs t0 > 0 and ratio > 1")
    times = []
    j = 0
    while True:
        t = t0 * ratio**j
        if t > t_end * (1 + 1e-12):
            break
        times.append(t)
        j += 1
    if include_end and (not times or times[-1] < t_end * (1 - 1e-12)):
        times.append(float(t_end))
    return tuple(times)


@dataclass(frozen=True)
class StepControl:
    cfl_adv: float = 0.4
    cfl_whistler: float = 0.25
    dt_max: float = 0.1
    schedule: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("cfl_adv", "cfl_whistler"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        sched = tuple(float(t) for t in self.schedule)
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be strictly increasing")
        object.__setattr__(self, "schedule", sched)


def stable_dt(s: SimState, c: StepControl) -> float:
    dx = s.grid.dx
    umax, bmax = max_speeds(s)
    dt_adv = c.cfl_adv * dx / max(umax, bmax, EPS_SMALL)
    dt_whistler = c.cfl_whistler * dx**2 / (math.pi**2 * s.params.eps_hall * bmax + EPS_SMALL)
    return min(dt_adv, dt_whistler, c.dt_max)


def _linear_symbols(s: SimState) -> tuple[np.ndarray, np.ndarray]:
    return -s.params.nu * s.grid.k2, -s.params.eta * s.grid.k2


def step(s: SimState, dt: float, control: StepControl | None = None, linear_only: bool = False) -> SimState:
    """Advance one IF-RK4 step.

    Diffusion is integrated exactly through exp(-nu |k|^2 dt) multipliers;
    the projected, dealiased nonlinear terms are handled by classical RK4
    in the integrating-factor variables.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if control is not None and not linear_only:
        limit = stable_dt(s, control)
        if dt > 1.1 * limit:
            raise ValueError(f"dt={dt:.3e} exceeds stable step {limit:.3e}")
    lu, lb = _linear_symbols(s)
    eu_half, eb_half = np.exp(0.5 * dt * lu), np.exp(0.5 * dt * lb)
    eu, eb = eu_half**2, eb_half**2
    u0, b0 = s.u.data, s.B.data

    if linear_only:
        u1, b1 = eu * u0, eb * b0
    else:
        grid, eps = s.grid, s.params.eps_hall

        def rhs(u, b):
            return nonlinear_tendencies(grid, u, b, eps)

        ku1, kb1 = rhs(u0, b0)
        ku2, kb2 = rhs(eu_half * (u0 + 0.5 * dt * ku1), eb_half * (b0 + 0.5 * dt * kb1))
        ku3, kb3 = rhs(eu_half * u0 + 0.5 * dt * ku2, eb_half * b0 + 0.5 * dt * kb2)
        ku4, kb4 = rhs(eu * u0 + dt * eu_half * ku3, eb * b0 + dt * eb_half * kb3)
        u1 = eu * u0 + (dt / 6.0) * (eu * ku1 + 2.0 * eu_half * (ku2 + ku3) + ku4)
        b1 = eb * b0 + (dt / 6.0) * (eb * kb1 + 2.0 * eb_half * (kb2 + kb3) + kb4)

    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(b1))):
        raise SolverError(f"non-finite state after step at t={s.t:.6g}, dt={dt:.3e}")
    grid = s.grid
    return SimState(Field(grid, u1, True), Field(grid, b1, True), s.t + dt, s.params)


def _frozen(s: SimState) -> SimState:
    u = s.u.data.copy()
    b = s.B.data.copy()
    u.setflags(write=False)
    b.setflags(write=False)
    return SimState(Field(s.grid, u, True), Field(s.grid, b, True), s.t, s.params)


class BudgetExceeded(RuntimeError):
    pass


def integrate(
    s0: SimState,
    t_end: float,
    control: StepControl,
    observers: Sequence[Observer] = (),
    linear_only: bool = False,
    max_steps: int | None = None,
    max_wall_seconds: float | None = None,
    dump_path: str | Path | None = None,
) -> SimState:
    """Integrate to ``t_end``, landing exactly on every schedule time in (s0.t, t_end].

    Observers are called with a read-only snapshot at each schedule time.
    On solver failure the last good state is written to ``dump_path``.
    """
    if not t_end > s0.t:
        raise ValueError("t_end must exceed the initial time")
    targets = [t for t in control.schedule if s0.t < t <= t_end]
    stops = sorted(set(targets) | {float(t_end)})
    observed = set(targets)
    s = s0
    n_steps = 0
    started = time.monotonic()
    for stop in stops:
        while s.t < stop:
            dt = stable_dt(s, control)
            landing = stop - s.t <= dt * (1 + 1e-12)
            if landing:
                dt = stop - s.t
            elif stop - s.t < 2 * dt:
                # split the remainder evenly to avoid a tiny last step
                dt = 0.5 * (stop - s.t)
            try:
                nxt = step(s, dt, linear_only=linear_only)
            except SolverError:
                if dump_path is not None:
                    from .io import save_checkpoint

                    save_checkpoint(dump_path, s)
                    log.error("solver failure at t=%.6g; state dumped to %s", s.t, dump_path)
                raise
            s = nxt.replace(t=stop) if landing else nxt
            n_steps += 1
            if max_steps is not None and n_steps > max_steps:
                raise BudgetExceeded(f"step budget of {max_steps} exhausted at t={s.t:.6g}")
            if max_wall_seconds is not None and time.monotonic() - started > max_wall_seconds:
                raise BudgetExceeded(f"wall-clock budget of {max_wall_seconds}s exhausted at t={s.t:.6g}")
        if stop in observed:
            snap = _frozen(s)
            for obs in observers:
                obs(snap)
    log.debug("integrated to t=%.6g in %d steps", s.t, n_steps)
    return s
