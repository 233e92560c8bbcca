"""Command-line interface: ``lsforecast <command> [options]``.

Every command prints one JSON record (``schema: 1``) on stdout.  Exit codes:
0 on success, 1 on a numeric failure (the record then carries ``error``),
2 on usage errors such as an unknown method.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.linalg import LinAlgError

from .bandwidth import CVLoss, cv_mb, cv_mf, default_grid
from .bootstrap import BootstrapConfig, calibrate_bandwidth_double_boot, interval
from .covariance import PDError
from .diagnostics import (Reference, acf, ks_statistic, qq_data, shapiro_wilk_combinations,
                          write_acf_csv, write_csv, write_qq_csv, write_sw_csv)
from .harness import (DESIGNS, parse_methods, run_moving_window, run_simulation_study)
from .predictors import MethodDescriptor, predict, predict_discrete_mode
from .rampfit import rampfit
from .series import GeneratorSpec, TimeSeries, generate, ingest_csv
from .transform import forward

SCHEMA = 1


class UsageError(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _emit(record: dict, out=None) -> None:
    out = out or sys.stdout
    out.write(json.dumps(_clean({"schema": SCHEMA, **record}), indent=2) + "\n")


def _method(args) -> MethodDescriptor:
    text = args.method
    try:
        m = MethodDescriptor.parse(text, loss=args.loss.upper() if getattr(args, "loss", None) else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cov = getattr(args, "cov", None)
    res = getattr(args, "residuals", None)
    kw = {}
    if cov:
        kw["cov_kind"] = "AR_IMPLIED" if cov == "ar" else "FLAT_TOP"
    if res:
        kw["residual_type"] = res.upper()
    if kw:
        try:
            m = MethodDescriptor.parse(text, loss=m.loss, **kw)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return m


def _series(args) -> TimeSeries:
    s = ingest_csv(args.input, value_col=args.value_col, age_col=args.age_col)
    tp = getattr(args, "tail_points", None)
    if tp:
        if tp > s.n:
            raise UsageError(f"--tail-points {tp} exceeds series length {s.n}")
        s = s.tail(tp)
    return s


def _bandwidth(y, m: MethodDescriptor, args):
    """User bandwidth or the cross-validated one; returns ``(b, h0, source)``."""
    if args.b is not None:
        return args.b, args.h0, "user"
    if m.is_mb:
        return cv_mb(y, smoother=m.smoother.value, fitted=m.residual_type.value == "FITTED",
                     max_origins=args.max_origins).b, args.h0, "cv"
    r = cv_mf(y, dist_kind=m.dist_kind(), T_mode=m.residual_type, cov_kind=m.cov_kind,
              max_origins=args.max_origins)
    return r.b, args.h0 if args.h0 is not None else r.h0, "cv"


# --- commands --------------------------------------------------------------

def cmd_simulate(args) -> dict:
    params = {}
    for kv in args.param or []:
        k, _, v = kv.partition("=")
        params[k] = json.loads(v)
    spec = GeneratorSpec(DESIGNS[args.design.upper()], args.n, args.seed, params, args.realization)
    ts = generate(spec)
    text = ts.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
        return {}
    return {"command": "simulate", "design": args.design.upper(), "n": args.n, "seed": args.seed,
            "realization": args.realization, "parameters": spec.resolved(), "out": args.out}


def cmd_predict(args) -> dict:
    m = _method(args)
    ts = _series(args)
    y = ts.values
    b, h0, src = _bandwidth(y, m, args)
    rec = {"command": "predict", "method": m.name, "loss": m.loss.value, "n": int(y.size),
           "bandwidth_b": b, "bandwidth_source": src, "seed": args.seed}
    if args.discrete:
        if m.is_mb:
            raise UsageError("--discrete needs a model-free method")
        dp = predict_discrete_mode(y, m.transform_config(b, h0), args.B_discrete, args.seed)
        rec.update(point=dp.mode, levels=dp.levels, probabilities=dp.probabilities)
        return rec
    out = predict(y, m, b, h0, seed=args.seed, M=args.M)
    rec.update(point=out.point, diagnostics=out.diagnostics)
    return rec


def cmd_interval(args) -> dict:
    m = _method(args)
    ts = _series(args)
    y = ts.values
    b, h0, src = _bandwidth(y, m, args)
    b_prime = args.b_prime
    cvr = None
    if args.calibrate:
        grid = args.calib_grid or list(np.round(b * np.array([0.5, 0.75, 1.0, 1.5, 2.0]), 6))
        b_prime, cvr = calibrate_bandwidth_double_boot(
            y, m, b, grid, target_cvr=1 - args.alpha, B=args.calib_B, C=args.C,
            seed=args.seed, return_cvr=True)
    boot = BootstrapConfig(B=args.B, alpha=args.alpha, b_prime=b_prime, seed=args.seed,
                           M=args.M, workers=args.workers)
    out = interval(y, m, b, boot, h0)
    lo, hi, _ = out.interval
    rec = {"command": "interval", "method": m.name, "n": int(y.size), "alpha": args.alpha,
           "B": args.B, "seed": args.seed, "bandwidth_b": b, "bandwidth_source": src,
           "b_prime": b_prime if b_prime is not None else b, "point": out.point,
           "interval": [lo, hi], "length": hi - lo}
    if cvr is not None:
        rec["calibration"] = {"grid": grid, "cvr": cvr}
    if args.out:
        write_csv(args.out, ["replicate", "root"], ((i, float(r)) for i, r in
                                                    enumerate(out.diagnostics["roots"])))
        rec["roots_csv"] = args.out
    return rec


def _fixed_bandwidths(items) -> dict:
    out = {}
    for kv in items or []:
        k, _, v = kv.partition("=")
        if not v:
            raise UsageError(f"bad --bandwidth {kv!r}, expected NAME=B")
        try:
            out[MethodDescriptor.parse(k).base_name if k[-2:].upper() not in ("-P", "-F")
                else MethodDescriptor.parse(k).name] = float(v)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return out


def cmd_evaluate(args) -> dict:
    try:
        methods = parse_methods(args.methods.split(",") if args.methods else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    boot = None
    if args.intervals:
        boot = BootstrapConfig(B=args.B, alpha=args.alpha, seed=args.seed, M=args.M)
    fixed = _fixed_bandwidths(args.bandwidth)
    if args.input:
        ts = _series(args)
        res = run_moving_window(ts, args.window, args.eval_points, methods, boot, args.seed,
                                include_rampfit=not args.no_rampfit, M=args.M,
                                max_origins=args.max_origins, bandwidths=fixed)
        meta = {"mode": "moving_window", "window": args.window, "eval_points": args.eval_points,
                "n": ts.n}
    else:
        if args.R < 1:
            raise UsageError("-R must be positive")
        res = run_simulation_study(args.design, methods, args.R, args.n, boot, args.seed, fixed,
                                   cv=args.cv.replace("-", "_"), M=args.M, workers=args.workers,
                                   max_origins=args.max_origins)
        meta = {"mode": "simulation", "design": args.design.upper(), "R": args.R, "n": args.n}
    table = res.to_csv()
    if args.out:
        Path(args.out).write_text(table)
    return {"command": "evaluate", **meta, "seed": args.seed, "methods": len(res.rows),
            "table_csv": args.out, **res.as_dict()}


def cmd_diagnose(args) -> dict:
    m = _method(args)
    if m.is_mb:
        raise UsageError("diagnose needs a model-free method")
    ts = _series(args)
    y = ts.values
    b, h0, src = _bandwidth(y, m, args)
    st = forward(y, m.transform_config(b, h0))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ks = {}
    rows = []
    for name, sample, ref in (("U", st.U, Reference.UNIFORM01), ("Z", st.Z, Reference.STDNORMAL),
                              ("epsilon", st.epsilon, Reference.STDNORMAL)):
        d, p = ks_statistic(sample, ref)
        ks[name] = {"D": d, "p_value": p}
        rows.append((name, ref.value, d, p))
    write_csv(out / "ks.csv", ["series", "reference", "D", "p_value"], rows)
    sw = shapiro_wilk_combinations(st.Z)
    write_sw_csv(out / "sw_z.csv", sw)
    max_lag = min(args.max_lag, y.size - 5)
    write_acf_csv(out / "acf_z.csv", acf(st.Z, max_lag))
    write_acf_csv(out / "acf_epsilon.csv", acf(st.epsilon, max_lag))
    write_qq_csv(out / "qq_z.csv", *qq_data(st.Z))
    write_qq_csv(out / "qq_epsilon.csv", *qq_data(st.epsilon))
    return {"command": "diagnose", "method": m.name, "n": int(y.size), "bandwidth_b": b,
            "bandwidth_source": src, "ks": ks,
            "shapiro_wilk": [{"lambda": e.lam, "W": e.W, "p_value": e.p} for e in sw],
            "files": sorted(p.name for p in out.glob("*.csv"))}


def cmd_rampfit(args) -> dict:
    ts = _series(args)
    times = ts.ages if (ts.ages is not None and not args.index_time) else None
    r = rampfit(ts.values, args.t1, args.t2, args.knn_k, args.max_iter, times=times)
    t = np.arange(1, ts.n + 1, dtype=float) if times is None else np.asarray(times)
    if args.predict_at is not None:
        t_next = args.predict_at
    else:
        t_next = float(t[-1] + (np.median(np.diff(t)) if t.size > 1 else 1.0))
    fitted = r.predict(t)
    rec = {"command": "rampfit", "n": ts.n, "t1": r.t1, "t2": r.t2, "x1": r.x1, "x2": r.x2,
           "ssqw": r.ssqw, "iterations": r.iterations, "converged": r.converged,
           "mse": float(np.mean((ts.values - fitted) ** 2)),
           "predict_at": t_next, "prediction": r.predict(t_next)}
    if args.out:
        write_csv(args.out, ["t", "value", "fitted", "sigma"],
                  zip(t.tolist(), ts.values.tolist(), fitted.tolist(), r.sigma.tolist()))
        rec["fitted_csv"] = args.out
    return rec


def cmd_bandwidth(args) -> dict:
    m = _method(args)
    y = _series(args).values
    grid = args.grid or default_grid(y.size, args.q)
    loss = CVLoss(args.cv_loss.upper())
    if m.is_mb:
        r = cv_mb(y, grid, loss, smoother=m.smoother.value,
                  fitted=m.residual_type.value == "FITTED", max_origins=args.max_origins)
    else:
        r = cv_mf(y, grid, args.keep_p, m.dist_kind(), loss, m.residual_type, m.cov_kind,
                  max_origins=args.max_origins)
    return {"command": "bandwidth", "method": m.name, "n": int(y.size), "b": r.b, "h0": r.h0,
            "losses": {repr(float(k)): v for k, v in r.losses.items()},
            "survivors": list(r.survivors),
            "ks": {repr(float(k)): v for k, v in r.ks.items()}}


# --- parser ----------------------------------------------------------------

def _input_args(p, required=True):
    p.add_argument("--input", required=required, help="CSV file (age,value or value)")
    p.add_argument("--value-col", type=int, default=-1)
    p.add_argument("--age-col", type=int, default=0)
    p.add_argument("--tail-points", type=int, default=None,
                   help="use only the last N observations")


def _method_args(p, default=None):
    p.add_argument("--method", required=default is None, default=default,
                   help="e.g. mb-ll, mf-llm, pmf-lc, lmf-llh, lmf-llm-ar")
    p.add_argument("--cov", choices=["flat-top", "ar"], default=None)
    p.add_argument("--residuals", choices=["fitted", "predictive"], default=None)
    p.add_argument("--loss", choices=["l2", "l1"], default=None)
    p.add_argument("--b", type=float, default=None, help="bandwidth; cross-validated if omitted")
    p.add_argument("--h0", type=float, default=None, help="secondary bandwidth")
    p.add_argument("--max-origins", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsforecast", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a simulated series as CSV")
    p.add_argument("--design", choices=["ar5", "tar1", "AR5", "TAR1"], required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--realization", type=int, default=0)
    p.add_argument("--param", action="append", help="override, e.g. tau=0.2 or phi=[0.5,0.2]")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="one-step-ahead point prediction")
    _input_args(p)
    _method_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--M", type=int, default=1000, help="Monte Carlo draws for LMF")
    p.add_argument("--discrete", action="store_true", help="mode predictor for discrete data")
    p.add_argument("--B-discrete", type=int, default=1000)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("interval", help="bootstrap prediction interval")
    _input_args(p)
    _method_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--B", type=int, default=250)
    p.add_argument("--M", type=int, default=1000)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--b-prime", type=float, default=None)
    g.add_argument("--calibrate", action="store_true", help="double bootstrap choice of b'")
    p.add_argument("--calib-grid", type=float, nargs="+", default=None)
    p.add_argument("--calib-B", type=int, default=50)
    p.add_argument("--C", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="write bootstrap roots CSV")
    p.set_defaults(func=cmd_interval)

    p = sub.add_parser("evaluate", help="simulation study or moving-window evaluation")
    p.add_argument("--design", choices=["ar5", "tar1", "AR5", "TAR1"], default="ar5")
    p.add_argument("-R", type=int, default=100)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--methods", default=None, help="comma list; all 28 rows by default")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--intervals", action="store_true")
    p.add_argument("--B", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--cv", choices=["pilot", "per-realization"], default="pilot")
    p.add_argument("--bandwidth", action="append", help="fix a bandwidth, e.g. MF-LLM=60")
    p.add_argument("--max-origins", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="write the table CSV")
    _input_args(p, required=False)
    p.add_argument("--window", type=int, default=189)
    p.add_argument("--eval-points", type=int, default=62)
    p.add_argument("--no-rampfit", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="KS/SW/ACF/QQ CSVs for the model-free transform")
    _input_args(p)
    _method_args(p, default="mf-llm")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-lag", type=int, default=40)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("rampfit", help="two-breakpoint ramp regression")
    _input_args(p)
    p.add_argument("--t1", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--t2", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--knn-k", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--index-time", action="store_true", help="use 1..n instead of ages")
    p.add_argument("--predict-at", type=float, default=None)
    p.add_argument("--out", default=None, help="write fitted values CSV")
    p.set_defaults(func=cmd_rampfit)

    p = sub.add_parser("bandwidth", help="cross-validated bandwidth")
    _input_args(p)
    _method_args(p)
    p.add_argument("--grid", type=float, nargs="+", default=None)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--keep-p", type=int, default=3)
    p.add_argument("--cv-loss", choices=["press", "presar"], default="press")
    p.set_defaults(func=cmd_bandwidth)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rec = args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        sys.stderr.write(f"lsforecast: error: {exc}\n")
        return 2
    except (ValueError, LinAlgError, PDError, FloatingPointError, ZeroDivisionError,
            OSError) as exc:
        _emit({"command": args.command, "error": type(exc).__name__, "message": str(exc)})
        return 1
    if rec:
        _emit(rec)
    return 0


if __name__ == "__main__":
    sys.exit(main())
