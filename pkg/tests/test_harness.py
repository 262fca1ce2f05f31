import json
import math
from pathlib import Path

import numpy as np
import pytest

from hallmhd.cli import main
from hallmhd.decay import PASS
from hallmhd.diagnostics import BOUNDARY_B, BOUNDARY_U, NormSeries, WeightedNormSpec, boundary_fraction
from hallmhd.dynamics import HallMhdParams, SimState
from hallmhd.experiment import (
    OUTPUT_ENV,
    ConfigError,
    FitSettings,
    RatioCheck,
    analyze_series,
    config_from_mapping,
    load_config,
    run_experiment,
)
from hallmhd.initial_data import Blob, InitialDataSpec, generate_initial_data, h3_norm
from hallmhd.io import load_checkpoint, read_json, read_norms_csv, save_checkpoint, write_norms_csv
from hallmhd.spectral import Field, Grid, random_field

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_config(tmp_path, **over):
    raw = {
        "grid": {"n": 16, "l": 16.0},
        "params": {"nu": 1.0, "eta": 1.0, "eps_hall": 1.0},
        "initial": {"blobs": [[0.0, 0.0, 0.0, 2.0]], "target_h3": 0.05, "seed": 3},
        "schedule": {"t0": 0.1, "ratio": 2**0.25},
        "run": {"t_end": 2.0},
        "norms": {"specs": ["u_a0_b0_p2", "B_a0_b0_p2", "B_a0_b1_p2", "omega_a0_b0_p2"]},
        "fit": {"t_s": 2.0, "t_min_factor": 0.05, "threshold": 1.0, "ratios": ["B_a0_b1_p2/B_a0_b0_p2"]},
        "output": {"dir": str(tmp_path / "out")},
    }
    for key, value in over.items():
        section, name = key.split("__")
        raw.setdefault(section, {})[name] = value
    return raw


# -- initial data ---------------------------------------------------------


def test_zero_amplitude_gives_zero_fields(grid16):
    spec = InitialDataSpec(blobs=(Blob((0, 0, 0), 0.8, (0.0, 0.0, 0.0)),), target_h3=None)
    u, B = generate_initial_data(spec, grid16)
    assert not np.any(u.data) and not np.any(B.data)


def test_single_blob_is_solenoidal_and_localized():
    g = Grid(64, 32.0)
    u, B = generate_initial_data(InitialDataSpec(blobs=(Blob((0, 0, 0), 2.0),), seed=4), g)
    s = SimState(u, B)
    assert s.divergence_error() <= 1e-12
    assert boundary_fraction(u) <= 1e-10 and boundary_fraction(B) <= 1e-10
    assert h3_norm(u) + h3_norm(B) == pytest.approx(1e-2, rel=1e-12)


def test_initial_data_is_deterministic(grid16):
    spec = InitialDataSpec(blobs=(Blob((0, 0, 0), 2.0),), seed=11)
    g = Grid(16, 16.0)
    a, b = generate_initial_data(spec, g), generate_initial_data(spec, g)
    assert np.array_equal(a[0].data, b[0].data) and np.array_equal(a[1].data, b[1].data)


def test_which_selects_fields():
    g = Grid(16, 16.0)
    u, B = generate_initial_data(InitialDataSpec(blobs=(Blob((0, 0, 0), 2.0),), which="B"), g)
    assert not np.any(u.data) and h3_norm(B) == pytest.approx(1e-2)


@pytest.mark.parametrize(
    "blob",
    [Blob((0, 0, 0), 1.0), Blob((5.0, 0, 0), 2.0), Blob((0, 0, 2.5), 2.0)],
    ids=["unresolved", "outside-half-box", "near-boundary"],
)
def test_initial_data_rejects_bad_blobs(blob):
    with pytest.raises(ValueError):
        generate_initial_data(InitialDataSpec(blobs=(blob,)), Grid(16, 10.0))


# -- file formats ---------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, grid16, rng):
    s = SimState(random_field(grid16, rng), random_field(grid16, rng), 1.25, HallMhdParams(0.5, 0.25, 2.0))
    save_checkpoint(tmp_path / "c.npz", s)
    r = load_checkpoint(tmp_path / "c.npz")
    assert r.t == s.t and r.params == s.params and r.grid == s.grid
    assert np.array_equal(r.u.data, s.u.data) and np.array_equal(r.B.data, s.B.data)


def test_norms_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    times = list(np.cumsum(rng.uniform(0.1, 1, 6)))
    spec = WeightedNormSpec("B", 1, 0, math.inf)
    series = {
        spec.label: NormSeries(spec.label, spec, list(times), list(rng.uniform(0, 1, 6))),
        BOUNDARY_U: NormSeries(BOUNDARY_U, None, list(times), list(rng.uniform(0, 1e-9, 6))),
        BOUNDARY_B: NormSeries(BOUNDARY_B, None, list(times), [0.0] * 6),
    }
    write_norms_csv(tmp_path / "n.csv", series)
    header = (tmp_path / "n.csv").read_text().splitlines()[0]
    assert header == "t,B_a1_b0_pinf,boundary_u,boundary_B"
    back = read_norms_csv(tmp_path / "n.csv")
    for name, s in series.items():
        assert back[name].times == s.times and back[name].values == s.values
    assert back[spec.label].spec == spec


# -- configuration --------------------------------------------------------


def test_shipped_configs_parse(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    cfg = load_config(CONFIGS / "default.toml")
    assert (cfg.grid.n, cfg.grid.length, cfg.t_end) == (64, 32.0, 24.0)
    assert cfg.params.eps_hall == 1.0 and cfg.fit.gate == "ratios"
    assert load_config(CONFIGS / "no_hall.toml").params.eps_hall == 0.0
    assert load_config(CONFIGS / "linear_heat.toml").linear_only


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="non-empty"):
        config_from_mapping(small_config(tmp_path, norms__specs=[]))
    with pytest.raises(ConfigError, match="unknown"):
        config_from_mapping(small_config(tmp_path, grid__m=3))
    with pytest.raises(ConfigError):
        config_from_mapping(small_config(tmp_path, grid__n=15))
    with pytest.raises(ConfigError):
        config_from_mapping(small_config(tmp_path, initial__kind="gaussian"))
    with pytest.raises(ConfigError):
        config_from_mapping(small_config(tmp_path, fit__ratios=["u_a0_b0_p4/u_a0_b0_p2"]))
    with pytest.raises(ConfigError):
        config_from_mapping(small_config(tmp_path, fit__gate="some"))
    with pytest.raises(ConfigError):
        RatioCheck.parse("u_a0_b0_p2")


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "elsewhere"))
    assert config_from_mapping(small_config(tmp_path)).output_dir == tmp_path / "elsewhere"


def test_fit_settings_round_trip():
    f = FitSettings(tol=0.1, ratios=(RatioCheck.parse("omega_a0_b0_p2/u_a0_b0_p2:direction"),))
    assert FitSettings.from_dict(json.loads(json.dumps(f.to_dict()))) == f


# -- pipeline -------------------------------------------------------------


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = config_from_mapping(small_config(tmp))
    return cfg, run_experiment(cfg)


def test_run_writes_artifacts(small_run):
    cfg, res = small_run
    for name in ("norms.csv", "report.json", "run_meta.json", "final_checkpoint.npz"):
        assert (res.output_dir / name).exists()
    report = read_json(res.output_dir / "report.json")
    assert report["status"] == res.report["status"]
    rec = report["queries"][0]
    assert set(rec) >= {"query", "predicted", "fitted", "stderr", "r2", "window", "verdict"}
    assert report["invariants"]["max_divergence_rel"] <= 1e-12
    assert report["invariants"]["energy_nonincreasing"]
    assert load_checkpoint(res.output_dir / "final_checkpoint.npz").t == cfg.t_end


def test_run_is_reproducible(small_run, tmp_path):
    cfg, res = small_run
    again = run_experiment(config_from_mapping(small_config(tmp_path)))
    for name in ("norms.csv", "report.json"):
        assert (res.output_dir / name).read_bytes() == (again.output_dir / name).read_bytes()


def test_analyze_reproduces_run_verdicts(small_run):
    cfg, res = small_run
    series = read_norms_csv(res.output_dir / "norms.csv")
    again = analyze_series(series, cfg.fit, cfg.initial.width)
    for key in ("status", "queries", "ratios"):
        assert again[key] == res.report[key]


def test_hall_and_no_hall_share_predictions(tmp_path):
    reports = []
    for eps in (1.0, 0.0):
        raw = small_config(tmp_path / str(eps), params__eps_hall=eps, run__t_end=0.5)
        reports.append(run_experiment(config_from_mapping(raw)).report)
    assert [q["predicted"] for q in reports[0]["queries"]] == [q["predicted"] for q in reports[1]["queries"]]


def test_budget_exhaustion_is_reported(tmp_path):
    res = run_experiment(config_from_mapping(small_config(tmp_path, budget__max_steps=2)))
    assert res.exit_code == 1
    assert "BudgetExceeded" in res.report["error"]


def test_linear_gaussian_run_recovers_heat_exponent(tmp_path):
    raw = {
        "grid": {"n": 64, "l": 32.0},
        "params": {"linear_only": True, "eps_hall": 0.0},
        "initial": {"kind": "gaussian", "blobs": [[0.0, 0.0, 0.0, 1.0]], "target_h3": "none"},
        "schedule": {"t0": 0.5, "ratio": 2 ** (1 / 16)},
        "run": {"t_end": 8.0},
        "norms": {"specs": ["u_a0_b0_p2"]},
        "fit": {"t_s": 0.5, "gate": "queries"},
        "output": {"dir": str(tmp_path)},
    }
    res = run_experiment(config_from_mapping(raw))
    q = res.report["queries"][0]
    assert q["fitted"] == pytest.approx(-0.75, abs=0.02)
    assert q["verdict"] == PASS and res.exit_code == 0


# -- command line ---------------------------------------------------------


def test_cli_predict(capsys):
    assert main(["predict", "--field", "u", "--a", "0", "--b", "0", "--p", "2"]) == 0
    assert float(capsys.readouterr().out) == -0.75
    assert main(["predict", "--field", "u", "--a", "3", "--b", "0", "--p", "2"]) == 0
    assert capsys.readouterr().out.strip() == "out-of-validity"
    assert main(["predict", "--field", "omega", "--a", "0", "--b", "0", "--p", "inf"]) == 0
    assert float(capsys.readouterr().out) == -2.0


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["predict", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('grid.n = 16\nmystery.key = 1\nnorms.specs = ["u_a0_b0_p2"]\n')
    assert main(["run", str(bad)]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == 2


def test_cli_analyze_matches_run(small_run, tmp_path, capsys):
    _, res = small_run
    code = main(["analyze", str(res.output_dir / "norms.csv"), "--out", str(tmp_path / "a.json")])
    assert code == (0 if res.report["status"] == PASS else 1)
    out = read_json(tmp_path / "a.json")
    assert out["queries"] == res.report["queries"] and out["ratios"] == res.report["ratios"]


def test_cli_verify_lemmas_small(capsys):
    assert main(["verify-lemmas", "--sweep", "100", "--seed", "7"]) == 0
    assert json.loads(capsys.readouterr().out)["gronwall"]["sweep"]["draws"] == 100
