"""Experiment configuration, the run pipeline and the shared analysis step."""

from __future__ import annotations

import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .decay import (
    FAIL,
    NO_VALID_WINDOW,
    OUT_OF_VALIDITY,
    PASS,
    ExponentQuery,
    NoValidWindow,
    auto_window,
    fit_decay,
    predicted_exponent,
    verdict,
)
from .diagnostics import BOUNDARY_B, BOUNDARY_U, NormSeries, WeightedNormSpec, record_norms
from .dynamics import HallMhdParams, SimState, SolverError, energy_budget, energy_scale, total_energy
from .initial_data import Blob, InitialDataSpec, generate_initial_data
from .integrator import BudgetExceeded, StepControl, geometric_schedule, integrate
from .io import save_checkpoint, write_json, write_norms_csv
from .spectral import Grid

log = logging.getLogger(__name__)

OUTPUT_ENV = "HALLMHD_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RatioCheck:
    """Fit of num/den against predicted(num) - predicted(den).

    rule "band": |slope - predicted| <= ratio_tol.
    rule "direction": slope on the predicted side with at least half its magnitude.
    """

    numerator: str
    denominator: str
    rule: str = "band"

    @classmethod
    def parse(cls, text: str) -> "RatioCheck":
        body, _, rule = text.partition(":")
        num, sep, den = body.partition("/")
        if not sep:
            raise ConfigError(f"ratio must look like 'num/den[:rule]', got {text!r}")
        rule = rule or "band"
        if rule not in ("band", "direction"):
            raise ConfigError(f"unknown ratio rule {rule!r}")
        WeightedNormSpec.from_label(num)
        WeightedNormSpec.from_label(den)
        return cls(num.strip(), den.strip(), rule)

    @property
    def name(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class FitSettings:
    tol: float = 0.15
    t_s: float = 1.0
    threshold: float = 1e-6
    t_min_factor: float = 5.0
    r2_min: float = 0.95
    ratio_tol: float = 0.15
    stretch_tol: float = 0.2
    ratios: tuple[RatioCheck, ...] = ()
    gate: str = "all"

    def __post_init__(self):
        if self.gate not in ("all", "queries", "ratios"):
            raise ConfigError(f"fit.gate must be all, queries or ratios, got {self.gate!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = [f"{r.name}:{r.rule}" for r in self.ratios]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FitSettings":
        d = dict(d)
        d["ratios"] = tuple(RatioCheck.parse(r) for r in d.get("ratios", ()))
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid = Grid(64, 32.0)
    params: HallMhdParams = HallMhdParams()
    linear_only: bool = False
    initial: InitialDataSpec = InitialDataSpec()
    control: StepControl = StepControl()
    schedule_t0: float = 0.5
    schedule_ratio: float = 2.0**0.25
    t_end: float = 24.0
    norms: tuple[WeightedNormSpec, ...] = ()
    shell: float = 0.1
    fit: FitSettings = FitSettings()
    output_dir: Path = Path("out")
    max_steps: int | None = None
    max_wall_seconds: float | None = None

    def __post_init__(self):
        if not self.norms:
            raise ConfigError("norm spec list must be non-empty")
        if self.initial.kind == "gaussian" and not self.linear_only:
            raise ConfigError("gaussian initial data is only allowed with params.linear_only = true")
        if not self.t_end > 0:
            raise ConfigError("run.t_end must be positive")
        try:
            self.initial.check_grid(self.grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        labels = {s.label for s in self.norms}
        for r in self.fit.ratios:
            for lab in (r.numerator, r.denominator):
                if lab not in labels:
                    raise ConfigError(f"ratio {r.name} references unrecorded norm {lab}")

    def schedule(self) -> tuple[float, ...]:
        return geometric_schedule(self.schedule_t0, self.t_end, self.schedule_ratio)

    def summary(self) -> dict:
        return {
            "grid": {"n": self.grid.n, "l": self.grid.length},
            "params": asdict(self.params),
            "linear_only": self.linear_only,
            "initial": {
                "kind": self.initial.kind,
                "blobs": [[*b.center, b.width] for b in self.initial.blobs],
                "target_h3": self.initial.target_h3,
                "seed": self.initial.seed,
                "which": self.initial.which,
                "width": self.initial.width,
            },
            "step": {
                "cfl_adv": self.control.cfl_adv,
                "cfl_whistler": self.control.cfl_whistler,
                "dt_max": self.control.dt_max,
            },
            "schedule": {"t0": self.schedule_t0, "ratio": self.schedule_ratio},
            "t_end": self.t_end,
            "norms": [s.label for s in self.norms],
            "shell": self.shell,
            "fit": self.fit.to_dict(),
        }


_KEYS = {
    "grid.n", "grid.l",
    "params.nu", "params.eta", "params.eps_hall", "params.linear_only",
    "initial.kind", "initial.blobs", "initial.target_h3", "initial.seed", "initial.which",
    "step.cfl_adv", "step.cfl_whistler", "step.dt_max",
    "schedule.t0", "schedule.ratio",
    "run.t_end",
    "norms.specs", "norms.shell",
    "fit.tol", "fit.t_s", "fit.threshold", "fit.t_min_factor", "fit.r2_min",
    "fit.ratio_tol", "fit.stretch_tol", "fit.ratios", "fit.gate",
    "output.dir",
    "budget.max_steps", "budget.max_wall_seconds",
}  # fmt: skip


def _flatten(d: Mapping, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def config_from_mapping(raw: Mapping) -> ExperimentConfig:
    flat = _flatten(raw)
    unknown = sorted(set(flat) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    g = flat.get
    try:
        grid = Grid(int(g("grid.n", 64)), float(g("grid.l", 32.0)))
        params = HallMhdParams(float(g("params.nu", 1.0)), float(g("params.eta", 1.0)), float(g("params.eps_hall", 1.0)))
        blobs = tuple(
            Blob(tuple(float(c) for c in b[:3]), float(b[3])) for b in g("initial.blobs", [[0.0, 0.0, 0.0, 1.0]])
        )
        target = g("initial.target_h3", 1e-2)
        initial = InitialDataSpec(
            blobs=blobs,
            target_h3=None if target is None or target == "none" else float(target),
            seed=int(g("initial.seed", 0)),
            which=str(g("initial.which", "both")),
            kind=str(g("initial.kind", "curl")),
        )
        control = StepControl(
            float(g("step.cfl_adv", 0.4)), float(g("step.cfl_whistler", 0.25)), float(g("step.dt_max", 0.1))
        )
        norms = tuple(WeightedNormSpec.from_label(s) for s in g("norms.specs", []))
        fit = FitSettings(
            tol=float(g("fit.tol", 0.15)),
            t_s=float(g("fit.t_s", 1.0)),
            threshold=float(g("fit.threshold", 1e-6)),
            t_min_factor=float(g("fit.t_min_factor", 5.0)),
            r2_min=float(g("fit.r2_min", 0.95)),
            ratio_tol=float(g("fit.ratio_tol", 0.15)),
            stretch_tol=float(g("fit.stretch_tol", 0.2)),
            ratios=tuple(RatioCheck.parse(r) for r in g("fit.ratios", [])),
            gate=str(g("fit.gate", "all")),
        )
        out_dir = Path(os.environ.get(OUTPUT_ENV) or g("output.dir", "out"))
        max_steps = g("budget.max_steps")
        max_wall = g("budget.max_wall_seconds")
        cfg = ExperimentConfig(
            grid=grid,
            params=params,
            linear_only=bool(g("params.linear_only", False)),
            initial=initial,
            control=control,
            schedule_t0=float(g("schedule.t0", 0.5)),
            schedule_ratio=float(g("schedule.ratio", 2.0**0.25)),
            t_end=float(g("run.t_end", 24.0)),
            norms=norms,
            shell=float(g("norms.shell", 0.1)),
            fit=fit,
            output_dir=out_dir,
            max_steps=None if max_steps is None else int(max_steps),
            max_wall_seconds=None if max_wall is None else float(max_wall),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(raw)


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _combined_boundary(series: Mapping[str, NormSeries]) -> NormSeries:
    bu, bb = series[BOUNDARY_U], series[BOUNDARY_B]
    out = NormSeries("boundary", None, list(bu.times))
    out.values = [max(a, b) for a, b in zip(bu.values, bb.values)]
    return out


def _windowed_fit(s: NormSeries, boundary: NormSeries, width: float, fit: FitSettings):
    try:
        window = auto_window(s, boundary, width, fit.threshold, fit.t_min_factor)
        return fit_decay(s, window, fit.t_s), None
    except (NoValidWindow, ValueError) as exc:
        return None, str(exc)


def _fit_record(fitted, reason) -> dict:
    if fitted is None:
        return {"fitted": None, "stderr": None, "r2": None, "window": None, "n_samples": 0, "reason": reason}
    return {
        "fitted": fitted.slope,
        "stderr": fitted.stderr,
        "r2": fitted.r_squared,
        "window": list(fitted.window),
        "n_samples": fitted.n_samples,
    }


def analyze_series(series: Mapping[str, NormSeries], fit: FitSettings, width: float) -> dict:
    """Fits and verdicts for every recorded norm and configured ratio."""
    boundary = _combined_boundary(series)
    queries = []
    for name, s in series.items():
        if name in (BOUNDARY_U, BOUNDARY_B) or s.spec is None or s.spec.field_kind == "custom":
            continue
        spec = s.spec
        q = ExponentQuery(spec.field_kind, spec.a, spec.b, spec.p)
        fitted, reason = _windowed_fit(s, boundary, width, fit)
        rec = {
            "label": name,
            "query": {"field": spec.field_kind, "a": spec.a, "b": spec.b, "p": _clean(spec.p), "weight": spec.weight_kind},
            "predicted": predicted_exponent(q),
            **_fit_record(fitted, reason),
            "verdict": verdict(q, fitted, fit.tol, fit.r2_min),
        }
        queries.append(rec)

    ratios = []
    for rc in fit.ratios:
        num, den = series[rc.numerator], series[rc.denominator]
        pn = predicted_exponent(ExponentQuery(num.spec.field_kind, num.spec.a, num.spec.b, num.spec.p))
        pd = predicted_exponent(ExponentQuery(den.spec.field_kind, den.spec.a, den.spec.b, den.spec.p))
        predicted = None if pn is None or pd is None else pn - pd
        fitted, reason = _windowed_fit(num.ratio(den), boundary, width, fit)
        rec = {"label": rc.name, "rule": rc.rule, "predicted": predicted, **_fit_record(fitted, reason)}
        if predicted is None:
            rec["verdict"] = OUT_OF_VALIDITY
        elif fitted is None:
            rec["verdict"] = NO_VALID_WINDOW
        else:
            good_fit = fitted.r_squared >= fit.r2_min
            in_band = abs(fitted.slope - predicted) <= fit.ratio_tol
            same_side = fitted.slope * math.copysign(1.0, predicted) >= 0.5 * abs(predicted)
            ok = in_band if rc.rule == "band" else same_side
            rec["verdict"] = PASS if ok and good_fit else FAIL
            rec["stretch_target"] = {"tol": fit.stretch_tol, "met": bool(abs(fitted.slope - predicted) <= fit.stretch_tol)}
        ratios.append(rec)

    gated = []
    if fit.gate in ("all", "queries"):
        gated += queries
    if fit.gate in ("all", "ratios"):
        gated += ratios
    status = PASS if all(r["verdict"] in (PASS, OUT_OF_VALIDITY) for r in gated) else FAIL
    return {"status": status, "gate": fit.gate, "queries": queries, "ratios": ratios}


@dataclass
class _Monitor:
    specs: tuple[WeightedNormSpec, ...]
    shell: float
    sink: dict = field(default_factory=dict)
    energies: list = field(default_factory=list)
    divergence: float = 0.0

    def __call__(self, s: SimState):
        record_norms(s, self.specs, self.sink, self.shell)
        self.energies.append(total_energy(s))
        self.divergence = max(self.divergence, s.divergence_error())


@dataclass
class RunResult:
    exit_code: int
    report: dict
    output_dir: Path


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    started = time.time()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    u0, B0 = generate_initial_data(cfg.initial, cfg.grid)
    s0 = SimState(u0, B0, 0.0, cfg.params)
    if not cfg.linear_only:
        s0.validate()
    control = StepControl(cfg.control.cfl_adv, cfg.control.cfl_whistler, cfg.control.dt_max, cfg.schedule())
    monitor = _Monitor(cfg.norms, cfg.shell)
    error = None
    final = s0
    try:
        final = integrate(
            s0,
            cfg.t_end,
            control,
            [monitor],
            linear_only=cfg.linear_only,
            max_steps=cfg.max_steps,
            max_wall_seconds=cfg.max_wall_seconds,
            dump_path=out / "failure_checkpoint.npz",
        )
    except (SolverError, BudgetExceeded) as exc:
        error = f"{type(exc).__name__}: {exc}"
        log.error("run aborted: %s", error)

    if monitor.sink:
        write_norms_csv(out / "norms.csv", monitor.sink)
    if error is None:
        save_checkpoint(out / "final_checkpoint.npz", final)

    report = {"status": None, "run": cfg.summary()}
    if monitor.sink:
        report.update(analyze_series(monitor.sink, cfg.fit, cfg.initial.width))
    else:
        report.update({"status": FAIL, "queries": [], "ratios": []})
    e = np.asarray(monitor.energies)
    rel_rise = float(np.max(np.diff(e) / e[:-1])) if len(e) > 1 and np.all(e[:-1] > 0) else 0.0
    budget = energy_budget(final)
    scale = energy_scale(final) or 1.0
    report["invariants"] = {
        # the scalar Gaussian hook is not solenoidal by construction
        "max_divergence_rel": None if cfg.initial.kind == "gaussian" else monitor.divergence,
        "energy_nonincreasing": rel_rise <= 1e-9,
        "max_energy_rise_rel": rel_rise,
        "final_cross_transfer_rel": abs(budget.cross_transfer) / scale,
        "final_hall_work_rel": abs(budget.hall_work) / scale,
        "snapshots": len(monitor.energies),
    }
    if error is not None:
        report["status"] = FAIL
        report["error"] = error
    write_json(out / "report.json", report)
    write_json(
        out / "run_meta.json",
        {
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
            "wall_seconds": time.time() - started,
            "final_time": final.t,
        },
    )
    return RunResult(0 if report["status"] == PASS else 1, report, out)
