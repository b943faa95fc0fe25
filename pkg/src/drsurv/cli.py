"""Command-line front end: ``drsurv estimate | km | simulate``.

Exit codes: 0 success, 2 input or flag error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import secrets
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cox import CoxOptions
from .data import read_csv, uniform_grid
from .errors import FitError, ValidationError
from .estimator import EstimatorConfig, fit_estimator, greenwood_se, kaplan_meier
from .kernel import KernelConfig
from .simulation import Scenario, run_study
from .variance import PerturbationConfig, influence_at, normal_quantile, pointwise_se_ci

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


def _times(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise argparse.ArgumentTypeError("times must be finite and nonnegative")
    return sorted(values)


def _level(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drsurv",
        description="Marginal survival under dependent censoring via two working Cox models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_curve_flags(p):
        p.add_argument("input", help="CSV with header time,status,x1,...,xp")
        p.add_argument("--tau", type=_positive, help="study end time (default: largest time)")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--grid-count", type=int, default=50, help="equispaced grid size on [0, tau)")
        g.add_argument("--grid", type=_times, help="explicit evaluation times t1,t2,...")
        p.add_argument("--ci-at", type=_times, help="times at which to report SE and CI")
        p.add_argument("--level", type=_level, default=0.95)
        p.add_argument("--output", "-o", help="report path (default: standard output)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--threads", type=int, default=1)

    est = sub.add_parser("estimate", help="adjusted survival curve with influence-function CIs")
    add_curve_flags(est)
    bw = est.add_mutually_exclusive_group()
    bw.add_argument("--bandwidth", type=_positive, help="kernel bandwidth a_n")
    bw.add_argument("--bandwidth-scale", type=_positive, default=1.0, help="c in a_n = c n^(-1/3)")
    est.add_argument("--epsilon-scale", type=_positive, default=1.0, help="c in eps_n = c n^(-5/12)")
    est.add_argument("--tol", type=_positive, default=1e-8)
    est.add_argument("--max-iter", type=int, default=100)

    km = sub.add_parser("km", help="Kaplan-Meier curve with Greenwood CIs")
    add_curve_flags(km)

    sim = sub.add_parser("simulate", help="Monte Carlo study of one working-model pair")
    sim.add_argument("--pair", type=int, choices=range(1, 7), default=2)
    sim.add_argument("--n", type=int, default=50)
    sim.add_argument("--reps", type=int, default=500)
    sim.add_argument("--bandwidth-scale", type=_positive, default=1.0)
    sim.add_argument("--epsilon-scale", type=_positive, default=1.0)
    sim.add_argument("--seed", type=int, help="master seed (default: drawn from system entropy)")
    sim.add_argument("--level", type=_level, default=0.95)
    sim.add_argument("--no-se", action="store_true", help="skip standard errors and coverage")
    sim.add_argument("--output", "-o", help="report path (default: standard output)")
    sim.add_argument("--format", choices=("json", "csv"), default="json",
                     help="json report, or csv with one row per replicate")
    sim.add_argument("--replicates-csv", help="also write per-replicate rows to this CSV")
    sim.add_argument("--threads", type=int, default=1)
    return parser


def _clean(obj):
    """JSON-safe copy: numpy to builtins, NaN/inf to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _curve_csv(curve: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "s", "se", "ci_lo", "ci_hi"])
    for row in zip(curve["t"], curve["s"], curve["se"], curve["ci_lo"], curve["ci_hi"]):
        w.writerow(["" if v is None else repr(v) for v in row])
    return buf.getvalue()


def _grid(args, tau: float):
    """Reporting grid (with the CI times merged in) and the CI times."""
    if args.grid is not None:
        grid = np.asarray(args.grid)
    else:
        if args.grid_count < 1:
            raise InputError("--grid-count must be at least 1")
        grid = uniform_grid(tau, args.grid_count)
    ci = args.ci_at if args.ci_at is not None else _default_ci_times(grid)
    grid = np.unique(np.concatenate([grid, ci]))
    if (grid > tau).any():
        raise InputError(f"evaluation times must lie in [0, tau={tau}]")
    return grid, np.asarray(ci, dtype=float)


def _default_ci_times(grid):
    m = len(grid)
    return np.unique(np.asarray(grid)[[(k * m) // 5 for k in range(1, 5) if (k * m) // 5 < m]])


def _curve_block(grid, s, se_at, level):
    """Curve arrays; ``se``/``ci_*`` are null except at the times in ``se_at``."""
    se = [None] * len(grid)
    lo, hi = [None] * len(grid), [None] * len(grid)
    z = normal_quantile(level)
    for t, value in se_at.items():
        k = int(np.searchsorted(grid, t))
        se[k] = value
        lo[k] = max(0.0, float(s[k]) - z * value)
        hi[k] = min(1.0, float(s[k]) + z * value)
    return {"t": grid.tolist(), "s": np.asarray(s).tolist(), "se": se, "ci_lo": lo, "ci_hi": hi}


def cmd_estimate(args) -> int:
    ds = read_csv(args.input, tau=args.tau)
    grid, ci_times = _grid(args, ds.tau)
    kernel = KernelConfig(bandwidth=args.bandwidth, bandwidth_scale=args.bandwidth_scale)
    cfg = EstimatorConfig(kernel=kernel, grid=tuple(grid), cox=CoxOptions(args.tol, args.max_iter))
    pcfg = PerturbationConfig(epsilon_scale=args.epsilon_scale)
    model = fit_estimator(ds, cfg)
    s = model.curve(grid)

    def one(t):
        bundle = influence_at(model, t, pcfg)
        se, _, _ = pointwise_se_ci(bundle, level=args.level)
        return t, se

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        se_at = dict(pool.map(one, ci_times))

    fits = {}
    for name, fit in (("failure", model.fit_T), ("censoring", model.fit_C)):
        fits[name] = {
            "coefficients": fit.coefficients.tolist(),
            "log_likelihood": fit.log_likelihood,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "gradient_max": float(np.abs(fit.gradient).max()),
        }
    meta = {
        "command": "estimate",
        "input": str(args.input),
        "n": ds.n,
        "p": ds.covariate_dim,
        "tau": ds.tau,
        "kernel": kernel.kernel,
        "bandwidth": model.bandwidth,
        "epsilon": pcfg.resolve(ds.n),
        "level": args.level,
        "ci_at": ci_times.tolist(),
    }
    return _write_curve(args, meta, fits, _curve_block(grid, s, se_at, args.level))


def cmd_km(args) -> int:
    ds = read_csv(args.input, tau=args.tau)
    grid, ci_times = _grid(args, ds.tau)
    curve = kaplan_meier(ds)
    se = greenwood_se(ds, ci_times)
    se_at = {float(t): float(v) for t, v in zip(ci_times, se)}
    meta = {
        "command": "km",
        "input": str(args.input),
        "n": ds.n,
        "p": ds.covariate_dim,
        "tau": ds.tau,
        "level": args.level,
        "ci_at": ci_times.tolist(),
        "se_method": "greenwood",
    }
    return _write_curve(args, meta, {}, _curve_block(grid, curve(grid), se_at, args.level))


def _write_curve(args, meta, fits, curve) -> int:
    report = _clean({"meta": meta, "fits": fits, "curve": curve})
    if args.format == "csv":
        _emit(_curve_csv(report["curve"]), args.output)
    else:
        _emit(json.dumps(report, indent=2) + "\n", args.output)
    return EXIT_OK


REPLICATE_FIELDS = ("replicate", "mse", "s_hat_1", "s_hat_2", "se_1", "se_2",
                    "covered_1", "covered_2", "censoring", "error")


def _replicates_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPLICATE_FIELDS)
    for r in rows:
        s_hat = r.get("s_hat", [None, None])
        se = r.get("se", [None, None])
        cov = r.get("covered", [None, None])
        values = [r["replicate"], r.get("mse"), s_hat[0], s_hat[1], se[0], se[1],
                  cov[0], cov[1], r["censoring"], r["error"]]
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                    for v in _clean(values)])
    return buf.getvalue()


def summary_table(report) -> str:
    sc = report.scenario
    t1, t2 = report.check_times

    def f(x, scale=1.0, digits=2):
        return "nan" if x is None or not math.isfinite(x) else f"{x * scale:.{digits}f}"

    lines = [
        f"pair {sc['pair']}  n={sc['n']}  reps={sc['reps']}  a_n={sc['bandwidth_scale']:g}n^(-1/3)  "
        f"eps_n={sc['epsilon_scale']:g}n^(-5/12)  seed={sc['seed']}",
        f"  MSE (x1e-3)          {f(report.mse, 1e3)}",
        f"  bias (x1e-2)  t={t1:g}: {f(report.bias[0], 1e2)}   t={t2:g}: {f(report.bias[1], 1e2)}",
        f"  coverage      t={t1:g}: {f(report.coverage[0])}   t={t2:g}: {f(report.coverage[1])}",
        f"  censoring proportion {f(report.censoring_proportion, 1, 3)}   failed replicates {report.failures}"
        + ("  [FLAGGED]" if report.flagged else ""),
    ]
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    seed_source = "flag"
    if args.seed is None:
        args.seed = secrets.randbits(63)
        seed_source = "entropy"
    try:
        sc = Scenario(
            n=args.n, reps=args.reps, pair=args.pair,
            bandwidth_scale=args.bandwidth_scale, epsilon_scale=args.epsilon_scale,
            seed=args.seed, level=args.level, compute_se=not args.no_se,
        )
    except ValueError as exc:
        raise InputError(str(exc))
    report = run_study(sc, workers=max(1, args.threads))
    doc = report.to_dict()
    doc["seed_source"] = seed_source
    doc = _clean(doc)
    if args.format == "csv":
        _emit(_replicates_csv(report.replicates), args.output)
    else:
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
    if args.replicates_csv:
        Path(args.replicates_csv).write_text(_replicates_csv(report.replicates), encoding="utf-8")
    (sys.stdout if args.output else sys.stderr).write(summary_table(report))
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "km": cmd_km, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", 1) < 1:
        print("drsurv: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"drsurv: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidationError, InputError, ValueError) as exc:
        print(f"drsurv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        print(f"drsurv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
