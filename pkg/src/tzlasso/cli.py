"""Command line surface: analyze a dataset, run studies, print calibrations.

Exit codes: 0 success, 2 input error (bad file, column, flag, or config),
3 numerical abort (non-convergence, pathological geometry, study over its
failure budget).  Every command is deterministic given its full flag set,
so reports carry no timestamps.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .inference import METHODS, AnalyzeOptions, SigmaSpec, analyze_with_fit
from .lasso import ConvergenceError
from .cv import cv_lambda
from .geometry import PartitionError
from .simulation import (
    DesignScheme,
    StudyAbortError,
    StudyConfig,
    calibrate_delta,
    run_study,
)
from .svgplot import interval_plot, length_boxplot
from .inference import universal_lambda
from .validation import ValidationError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

REPORT_CSV_COLUMNS = (
    "variable",
    "name",
    "method",
    "target",
    "high_value",
    "z_obs",
    "sigma_eta",
    "estimate",
    "lower",
    "upper",
    "level",
    "p_value",
    "truncation",
    "flags",
)


def _method_key(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in METHODS:
        raise ValidationError(
            f"unknown method {name!r}; choose from "
            + ", ".join(m.replace("_", "-") for m in METHODS)
        )
    return key


def _load_table(path: str, response: str, exclude: list[str]):
    try:
        frame = pd.read_csv(path, sep=None, engine="python")
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}")
    except Exception as err:
        raise ValidationError(f"could not parse {path}: {err}")
    if response not in frame.columns:
        raise ValidationError(f"response column {response!r} not in {path}")
    for col in exclude:
        if col not in frame.columns:
            raise ValidationError(f"excluded column {col!r} not in {path}")
    y = pd.to_numeric(frame[response], errors="coerce")
    if y.isna().any():
        raise ValidationError(f"response column {response!r} is not numeric")
    predictors = [c for c in frame.columns if c != response and c not in exclude]
    if not predictors:
        raise ValidationError("no predictor columns remain after exclusions")
    cols = []
    for c in predictors:
        vals = pd.to_numeric(frame[c], errors="coerce")
        if vals.isna().any():
            raise ValidationError(f"predictor column {c!r} is not numeric")
        cols.append(vals.to_numpy(dtype=float))
    X = np.column_stack(cols)
    return X, y.to_numpy(dtype=float), predictors


def _parse_sigma(text: str) -> SigmaSpec:
    if text.startswith("known:"):
        try:
            value = float(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad sigma value in {text!r}")
        return SigmaSpec("known", value)
    if text in ("ols", "ols_full"):
        return SigmaSpec("ols_full")
    if text == "reid":
        return SigmaSpec("reid")
    raise ValidationError("--sigma must be known:<value>, ols, or reid")


def _json_safe(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def _result_rows(results) -> list[dict]:
    rows = []
    for r in results:
        iv = r.interval
        rows.append(
            {
                "variable": r.variable,
                "name": r.name,
                "method": r.method,
                "target": r.target.kind if r.target else None,
                "high_value": r.target.high_value if r.target else None,
                "z_obs": _json_safe(r.z_obs),
                "sigma_eta": _json_safe(r.sigma_eta),
                "estimate": _json_safe(r.point_estimate),
                "lower": _json_safe(iv.lower) if iv else None,
                "upper": _json_safe(iv.upper) if iv else None,
                "level": iv.level if iv else None,
                "p_value": _json_safe(r.p_value),
                "truncation": str(r.truncation) if r.truncation else None,
                "flags": list(r.flags),
            }
        )
    return rows


def _write_report_csv(rows: list[dict], path: Path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_COLUMNS)
        for row in rows:
            out = []
            for col in REPORT_CSV_COLUMNS:
                v = row[col]
                if col == "flags":
                    v = ";".join(v)
                out.append("" if v is None else v)
            writer.writerow(out)


def cmd_analyze(args) -> int:
    methods = tuple(_method_key(m) for m in args.method.split(","))
    target = args.target.replace("-", "_")
    if target in ("stable_t", "stable_l1"):
        wanted = "tz_stab_t" if target == "stable_t" else "tz_stab_l1"
        if args.method == "tz-v":  # default; switch to the matching method
            methods = (wanted,)
        bad = [m for m in methods if m not in ("naive", "bonferroni", wanted)]
        if bad:
            raise ValidationError(
                f"target {args.target} pairs with method {wanted.replace('_','-')}"
                f"; incompatible methods {bad}"
            )
        target_kind = "auto"
    elif target in ("full", "partial", "auto"):
        target_kind = target
    else:
        raise ValidationError(
            "--target must be full, partial, stable-t, or stable-l1"
        )

    X, y, names = _load_table(args.input, args.response, args.exclude or [])
    n = X.shape[0]
    if args.lam == "cv":
        rng = np.random.default_rng(args.seed)
        lam_obs = cv_lambda(X, y, rng, include_intercept=not args.no_intercept)
    else:
        try:
            lam_obs = float(args.lam)
        except ValueError:
            raise ValidationError("--lambda must be a number or 'cv'")
        if lam_obs < 0:
            raise ValidationError("--lambda must be nonnegative")

    sigma = _parse_sigma(args.sigma)
    options = AnalyzeOptions(
        include_intercept=not args.no_intercept,
        cutoff=args.cutoff,
        lambda_high=None if args.lambda_high is None else args.lambda_high * n,
        seed=args.seed,
    )
    fit, sigma_val, results = analyze_with_fit(
        X,
        y,
        lam_obs * n,
        methods=methods,
        target_kind=target_kind,
        sigma=sigma,
        alpha=args.alpha,
        options=options,
        names=names,
    )

    digest = hashlib.sha256(Path(args.input).read_bytes()).hexdigest()
    rows = _result_rows(results)
    report = {
        "metadata": {
            "tool": "tzlasso",
            "version": __version__,
            "command": "analyze",
            "input": os.path.basename(args.input),
            "input_sha256": digest,
            "response": args.response,
            "lambda_per_obs": lam_obs,
            "sigma": sigma_val,
            "alpha": args.alpha,
            "target": args.target,
            "methods": list(methods),
            "seed": args.seed,
            "selected": [names[j] for j in fit.active_set],
        },
        "results": rows,
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    _write_report_csv(rows, out_dir / "report.csv")
    if args.svg:
        svg_rows = [
            {
                "name": r["name"],
                "method": r["method"],
                "estimate": _from_safe(r["estimate"]),
                "lower": _from_safe(r["lower"]),
                "upper": _from_safe(r["upper"]),
            }
            for r in rows
            if r["lower"] is not None
        ]
        (out_dir / "intervals.svg").write_text(
            interval_plot(svg_rows, title=f"{os.path.basename(args.input)}: "
                          f"{int(100 * (1 - args.alpha))}% intervals")
        )
    print(
        f"analyzed {args.input}: n={X.shape[0]} p={X.shape[1]} "
        f"lambda={lam_obs:.4g} selected={len(fit.active_set)} -> {out_dir}"
    )
    return EXIT_OK


def _from_safe(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return None if v is None else float(v)


def cmd_simulate(args) -> int:
    try:
        payload = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {args.config}")
    except json.JSONDecodeError as err:
        raise ValidationError(f"config is not valid JSON: {err}")
    if args.replications is not None:
        payload["replications"] = args.replications
    cfg = StudyConfig.from_dict(payload)

    report = run_study(cfg, n_jobs=args.threads, keep_lengths=args.svg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "study.json").write_text(report.to_json() + "\n")
    (out_dir / "study.csv").write_text(report.to_csv())
    if args.svg:
        (out_dir / "lengths.svg").write_text(
            length_boxplot(
                {m: list(v) for m, v in (report.raw_lengths or {}).items()},
                title=(
                    f"n={cfg.n} p={cfg.p} signal={cfg.signal} "
                    f"lambda={report.lambda_per_obs:.3g}"
                ),
            )
        )
    for s in report.methods:
        print(
            f"{s.method:>12}: n={s.n_intervals:5d} coverage={s.coverage:.3f} "
            f"median_length={s.median_length:.4g} "
            f"infinite={s.infinite_proportion:.3f}"
        )
    print(f"study written to {out_dir}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    design = DesignScheme(kind=args.design, rho=args.rho)
    d_low, d_high = calibrate_delta(
        args.n, args.p, design, reps=args.reps, seed=args.seed
    )
    lam_u = universal_lambda(args.n, args.p)
    print(f"delta_low   = {d_low:.4f}")
    print(f"delta_high  = {d_high:.4f}")
    print(f"lambda_universal (per-observation) = {lam_u:.4f}")
    print(f"lambda_universal (sum scale, x n)  = {lam_u * args.n:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tzlasso",
        description="Truncated-Z inference for lasso-selected coefficients",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="analyze a delimited dataset")
    pa.add_argument("input", help="comma- or tab-delimited file with header")
    pa.add_argument("--response", required=True, help="response column name")
    pa.add_argument("--exclude", action="append", help="column to drop")
    pa.add_argument(
        "--lambda", dest="lam", default="cv",
        help="per-observation penalty, or 'cv' (default)",
    )
    pa.add_argument("--method", default="tz-v", help="comma list of methods")
    pa.add_argument(
        "--target", default="auto",
        help="full | partial | stable-t | stable-l1 (default auto)",
    )
    pa.add_argument("--alpha", type=float, default=0.1)
    pa.add_argument("--sigma", default="reid", help="known:<v> | ols | reid")
    pa.add_argument("--cutoff", type=float, default=None)
    pa.add_argument(
        "--lambda-high", dest="lambda_high", type=float, default=None,
        help="per-observation stabilization penalty",
    )
    pa.add_argument("--no-intercept", action="store_true")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", default="tzlasso-report")
    pa.add_argument("--svg", action="store_true")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="run a coverage/length study")
    ps.add_argument("config", help="StudyConfig JSON document")
    ps.add_argument("--replications", type=int, default=None)
    ps.add_argument(
        "--threads", type=int,
        default=int(os.environ.get("TZLASSO_THREADS", "1")),
    )
    ps.add_argument("--out", default="tzlasso-study")
    ps.add_argument("--svg", action="store_true")
    ps.set_defaults(func=cmd_simulate)

    pc = sub.add_parser("calibrate", help="print signal/penalty calibrations")
    pc.add_argument("--n", type=int, required=True)
    pc.add_argument("--p", type=int, required=True)
    pc.add_argument(
        "--design",
        default="independent",
        choices=["independent", "block_equicorr", "toeplitz"],
    )
    pc.add_argument("--rho", type=float, default=0.0)
    pc.add_argument("--reps", type=int, default=1000)
    pc.add_argument("--seed", type=int, default=0)
    pc.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, PartitionError, StudyAbortError) as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
