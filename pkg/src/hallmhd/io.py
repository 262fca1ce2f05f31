"""File formats: checkpoints (.npz), norm time series (CSV) and JSON reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .diagnostics import BOUNDARY_B, BOUNDARY_U, NormSeries, WeightedNormSpec, series_table
from .dynamics import HallMhdParams, SimState
from .spectral import Field, Grid

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, s: SimState):
    """Write grid, parameters, time and full spectral coefficients of u and B."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(CHECKPOINT_VERSION),
            n=np.int64(s.grid.n),
            length=np.float64(s.grid.length),
            t=np.float64(s.t),
            nu=np.float64(s.params.nu),
            eta=np.float64(s.params.eta),
            eps_hall=np.float64(s.params.eps_hall),
            u_hat=np.ascontiguousarray(s.u.data),
            B_hat=np.ascontiguousarray(s.B.data),
        )


def load_checkpoint(path: str | Path) -> SimState:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        grid = Grid(int(z["n"]), float(z["length"]))
        params = HallMhdParams(float(z["nu"]), float(z["eta"]), float(z["eps_hall"]))
        u = Field(grid, z["u_hat"].copy(), spectral=True)
        B = Field(grid, z["B_hat"].copy(), spectral=True)
        return SimState(u, B, float(z["t"]), params)


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.17e}"


def write_norms_csv(path: str | Path, series: Mapping[str, NormSeries]):
    """Header ``t, <label>..., boundary_u, boundary_B``; full-precision values."""
    names = [n for n in series if n not in (BOUNDARY_U, BOUNDARY_B)]
    names += [n for n in (BOUNDARY_U, BOUNDARY_B) if n in series]
    times, cols = series_table({n: series[n] for n in names})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names])
        for i, t in enumerate(times):
            w.writerow([_fmt(t), *(_fmt(cols[n][i]) for n in names)])


def read_norms_csv(path: str | Path) -> dict[str, NormSeries]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != "t":
        raise ValueError(f"{path}: first column must be 't'")
    header = [h.strip() for h in rows[0]]
    out: dict[str, NormSeries] = {}
    for name in header[1:]:
        spec = None if name in (BOUNDARY_U, BOUNDARY_B) else WeightedNormSpec.from_label(name)
        out[name] = NormSeries(name, spec)
    for row in rows[1:]:
        if not row:
            continue
        t = float(row[0])
        for name, cell in zip(header[1:], row[1:]):
            out[name].times.append(t)
            out[name].values.append(float(cell))
    return out


def write_json(path: str | Path, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
