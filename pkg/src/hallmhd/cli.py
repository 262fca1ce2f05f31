"""Command-line entry point: ``hallmhd <command> ...``.

Exit codes: 0 success, 1 a verdict or check failed, 2 bad configuration or input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .decay import ExponentQuery, predicted_exponent
from .dynamics import SolverError
from .experiment import ConfigError, FitSettings, analyze_series, load_config, run_experiment
from .io import read_json, read_norms_csv, write_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _p_value(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _dump(payload: dict):
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg)
    print(f"status: {result.report['status']}  (report: {result.output_dir / 'report.json'})")
    for rec in result.report["queries"] + result.report["ratios"]:
        fitted = "n/a" if rec["fitted"] is None else f"{rec['fitted']:+.4f}"
        predicted = "n/a" if rec["predicted"] is None else f"{rec['predicted']:+.4f}"
        print(f"  {rec['label']:<32} predicted {predicted:>8}  fitted {fitted:>8}  {rec['verdict']}")
    return result.exit_code


def cmd_predict(args) -> int:
    q = ExponentQuery(args.field, args.a, args.b, args.p)
    value = predicted_exponent(q)
    print("out-of-validity" if value is None else repr(value))
    return EXIT_OK


def cmd_analyze(args) -> int:
    csv_path = Path(args.norms_csv)
    series = read_norms_csv(csv_path)
    report_path = csv_path.with_name("report.json")
    if report_path.exists() and not args.ignore_report:
        run = read_json(report_path)["run"]
        fit = FitSettings.from_dict(run["fit"])
        width = float(run["initial"]["width"])
    else:
        fit = FitSettings(
            tol=args.tol,
            t_s=args.t_s,
            threshold=args.threshold,
            t_min_factor=args.t_min_factor,
            r2_min=args.r2_min,
            ratio_tol=args.ratio_tol,
        )
        width = args.width
    result = analyze_series(series, fit, width)
    if args.out:
        write_json(args.out, result)
    _dump(result)
    return EXIT_OK if result["status"] == "pass" else EXIT_FAIL


def cmd_verify_lemmas(args) -> int:
    from .checks import verify_lemmas

    result = verify_lemmas(args.sweep, args.seed)
    _dump(result)
    return EXIT_OK if result["passed"] else EXIT_FAIL


def cmd_oracle_heat(args) -> int:
    from .checks import run_heat_oracle

    result = run_heat_oracle(n=args.n, length=args.l, sigma=args.sigma, t_end=args.t_end)
    _dump(result)
    return EXIT_OK if result["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hallmhd", description="Hall-MHD decay-rate experiments and checks")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a TOML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("predict", help="print the predicted decay exponent")
    p.add_argument("--field", required=True, choices=("u", "B", "omega"))
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--p", type=_p_value, required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("analyze", help="re-fit a recorded norms.csv")
    p.add_argument("norms_csv")
    p.add_argument("--out", help="write the analysis JSON here")
    p.add_argument("--ignore-report", action="store_true", help="use the flags below even if report.json exists")
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=0.15)
    p.add_argument("--t-s", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--t-min-factor", type=float, default=5.0)
    p.add_argument("--r2-min", type=float, default=0.95)
    p.add_argument("--ratio-tol", type=float, default=0.15)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify-lemmas", help="Gronwall and parabolic interpolation oracles")
    p.add_argument("--sweep", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_lemmas)

    p = sub.add_parser("oracle-heat", help="linear solver against the closed-form heat solution")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--l", type=float, default=32.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--t-end", type=float, default=24.0)
    p.set_defaults(func=cmd_oracle_heat)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
