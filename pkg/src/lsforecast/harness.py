"""Simulation studies and moving-window evaluation over the method matrix."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .bandwidth import cv_mb, cv_mf, default_grid
from .bootstrap import BootstrapConfig, mb_roots, mf_roots
from .distribution import TMode
from .kernels import KernelSpec
from .predictors import Family, MethodDescriptor, fit_mb, lmf_draws, reduce_loss
from .rampfit import rampfit
from .series import EvalMetrics, GeneratorKind, GeneratorSpec, TimeSeries, generate, score
from .transform import forward

PILOT_REALIZATION = 2 ** 31 - 1
BOOT_STREAM = 0x424F4F54

DESIGNS = {"AR5": GeneratorKind.AR5_SINE, "TAR1": GeneratorKind.TAR1_SINE}


def method_matrix(residuals: Sequence[str] = ("P", "F")) -> List[MethodDescriptor]:
    """MB-LC, MB-LL, then MF/LMF x {LC, LLH, LLM} x {flat-top, AR-implied}."""
    bases = ["MB-LC", "MB-LL"]
    for fam in ("MF", "LMF"):
        bases += [f"{fam}-{s}" for s in ("LC", "LLH", "LLM")]
    for fam in ("MF", "LMF"):
        bases += [f"{fam}-{s}-ARMA" for s in ("LC", "LLH", "LLM")]
    return [MethodDescriptor.parse(f"{b}-{r}") for b in bases for r in residuals]


def parse_methods(names: Optional[Sequence[str]]) -> List[MethodDescriptor]:
    if not names:
        return method_matrix()
    out = []
    for name in names:
        toks = name.upper().replace("_", "-").split("-")
        if toks[-1] in ("P", "F"):
            out.append(MethodDescriptor.parse(name))
        else:
            out += [MethodDescriptor.parse(f"{name}-{r}") for r in ("P", "F")]
    return out


def _bw_key(m: MethodDescriptor):
    """Methods sharing a transform also share a bandwidth."""
    if m.is_mb:
        return ("MB", m.smoother.value, m.residual_type.value)
    return ("MF", m.smoother.value, m.residual_type.value, m.cov_kind.value)


def select_bandwidth(y: NDArray, m: MethodDescriptor, max_origins: Optional[int] = 50,
                     b_grid: Optional[Sequence[float]] = None) -> float:
    """Cross-validated bandwidth for a method on one series."""
    if m.is_mb:
        return cv_mb(y, b_grid, smoother=m.smoother.value,
                     fitted=m.residual_type is TMode.FITTED, max_origins=max_origins).b
    return cv_mf(y, b_grid, dist_kind=m.dist_kind(), T_mode=m.residual_type,
                 cov_kind=m.cov_kind, max_origins=max_origins).b


def _sub_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class MethodRecord:
    predictions: List[float] = field(default_factory=list)
    truths: List[float] = field(default_factory=list)
    intervals: List[tuple] = field(default_factory=list)
    failures: int = 0


@dataclass
class StudyResult:
    rows: Dict[str, EvalMetrics]
    excluded: Dict[str, int]
    bandwidths: Dict[str, float]
    records: Dict[str, MethodRecord] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "residuals", "bias", "mse", "cvr", "mean_length", "sd_length",
                    "n_realizations", "excluded", "bandwidth_b"])
        for name, met in self.rows.items():
            base, _, res = name.rpartition("-") if name[-2:] in ("-P", "-F") else (name, "", "")
            w.writerow([base, res] + [repr(float(v)) for v in (met.bias, met.mse, met.cvr,
                                                               met.mean_length, met.sd_length)]
                       + [met.n_realizations, self.excluded.get(name, 0),
                          repr(float(self.bandwidths.get(name, float("nan"))))])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {"rows": {k: v.as_dict() for k, v in self.rows.items()},
                "excluded": dict(self.excluded),
                "bandwidths": {k: float(v) for k, v in self.bandwidths.items()}}


def evaluate_series(hist: NDArray, methods: Sequence[MethodDescriptor], bandwidths: Dict,
                    boot: Optional[BootstrapConfig], seed: int, M: int = 1000,
                    heteroscedastic: bool = False) -> Dict[str, tuple]:
    """Predict the value after ``hist`` with every method.

    Returns ``{name: (point, interval or None)}``; a failing method maps to
    the exception instead.  Model-free methods with identical transform
    settings share one forward pass.
    """
    out = {}
    states = {}
    for m in methods:
        try:
            b = bandwidths[_bw_key(m)]
            if m.is_mb:
                kern = KernelSpec(bandwidth_b=b)
                if boot is None:
                    out[m.name] = (fit_mb(hist, kern, m.fit_mode(), heteroscedastic).point, None)
                else:
                    rs = mb_roots(hist, kern, m.fit_mode(), boot, heteroscedastic)
                    out[m.name] = (rs.predictor_pi, rs.interval(boot.alpha))
                continue
            cfg = m.transform_config(b)
            key = (cfg.dist_kind, cfg.T_mode, cfg.cov_kind, b)
            if key not in states:
                states[key] = forward(hist, cfg)
            st = states[key]
            limit = m.family is Family.LMF
            if boot is None:
                innov = lmf_draws(seed, M) if limit else st.epsilon
                out[m.name] = (reduce_loss(st.g(innov), m.loss), None)
            else:
                rs = mf_roots(hist, cfg, replace(boot, M=M), m.loss, limit, state=st)
                out[m.name] = (rs.predictor_pi, rs.interval(boot.alpha))
        except Exception as exc:  # recorded and excluded, never aborts a study
            out[m.name] = exc
    return out


def run_simulation_study(design: str, methods: Optional[Sequence[MethodDescriptor]] = None,
                         R: int = 100, n: int = 1000, boot: Optional[BootstrapConfig] = None,
                         seed: int = 0, bandwidths: Optional[Dict] = None,
                         cv: str = "pilot", M: int = 1000, workers: int = 1,
                         max_origins: Optional[int] = 50,
                         parameters: Optional[dict] = None) -> StudyResult:
    """Predict ``Y_n`` from ``Y_1..Y_{n-1}`` over ``R`` realizations.

    Parameters
    ----------
    design : {"AR5", "TAR1"}
    methods : list of MethodDescriptor
        Defaults to the full matrix.
    boot : BootstrapConfig, optional
        When given, intervals are built too (seed derived per realization).
    bandwidths : dict, optional
        Fixed bandwidths keyed by method name (e.g. ``"MF-LLM-P"``) or base
        name (``"MF-LLM"``); unspecified methods are cross-validated.
    cv : {"pilot", "per_realization"}
        Cross-validate once on an independent pilot realization (default) or
        on every realization.
    """
    kind = DESIGNS[design.upper()]
    methods = list(methods) if methods else method_matrix()
    par = dict(parameters or {})

    def realize(r: int) -> TimeSeries:
        return generate(GeneratorSpec(kind, n, seed, par, realization=r))

    fixed = {}
    for m in methods:
        for key in (m.name, m.base_name):
            if bandwidths and key in bandwidths:
                fixed[_bw_key(m)] = float(bandwidths[key])
    pilot_bw = dict(fixed)
    if cv == "pilot":
        pilot = realize(PILOT_REALIZATION).values[:-1]
        for m in methods:
            k = _bw_key(m)
            if k not in pilot_bw:
                pilot_bw[k] = select_bandwidth(pilot, m, max_origins)

    def one(r: int):
        y = realize(r).values
        hist, truth = y[:-1], float(y[-1])
        bw = dict(pilot_bw)
        if cv != "pilot":
            for m in methods:
                k = _bw_key(m)
                if k not in bw:
                    bw[k] = select_bandwidth(hist, m, max_origins)
        b = None if boot is None else replace(boot, seed=_sub_seed(boot.seed, BOOT_STREAM, r))
        return truth, evaluate_series(hist, methods, bw, b, _sub_seed(seed, r), M), bw

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(R)))
    else:
        results = [one(r) for r in range(R)]

    records = {m.name: MethodRecord() for m in methods}
    used_bw = {}
    for truth, res, bw in results:
        for m in methods:
            rec = records[m.name]
            used_bw[m.name] = bw[_bw_key(m)]
            val = res[m.name]
            if isinstance(val, Exception):
                rec.failures += 1
                continue
            rec.predictions.append(val[0])
            rec.truths.append(truth)
            if val[1] is not None:
                rec.intervals.append(val[1])
    rows, excluded = {}, {}
    for m in methods:
        rec = records[m.name]
        excluded[m.name] = rec.failures
        if rec.predictions:
            rows[m.name] = score(rec.predictions, rec.truths, rec.intervals if boot else None)
    return StudyResult(rows, excluded, used_bw, records)


def run_moving_window(series, window_w: int = 189, eval_count: int = 62,
                      methods: Optional[Sequence[MethodDescriptor]] = None,
                      boot: Optional[BootstrapConfig] = None, seed: int = 0,
                      include_rampfit: bool = True, M: int = 1000,
                      max_origins: Optional[int] = 50,
                      bandwidths: Optional[Dict] = None) -> StudyResult:
    """Rolling one-step evaluation over the last ``eval_count`` points.

    Each target ``Y_t`` is predicted from the trailing window
    ``Y_{t-w}..Y_{t-1}``, with bandwidths cross-validated on that window
    unless fixed in ``bandwidths``.
    """
    y = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    n = y.size
    if n <= window_w + eval_count - 1 or eval_count < 1:
        raise ValueError("series too short for the requested window and evaluation count")
    methods = list(methods) if methods else method_matrix()
    names = [m.name for m in methods] + (["RAMPFIT"] if include_rampfit else [])
    records = {k: MethodRecord() for k in names}
    used_bw: Dict[str, float] = {}
    grid = default_grid(window_w)
    for j in range(n - eval_count, n):
        hist, truth = y[j - window_w:j], float(y[j])
        bw = {}
        for m in methods:
            k = _bw_key(m)
            fixed = None
            if bandwidths:
                fixed = bandwidths.get(m.name, bandwidths.get(m.base_name))
            if k not in bw:
                bw[k] = float(fixed) if fixed is not None else select_bandwidth(hist, m, max_origins, grid)
            used_bw[m.name] = bw[k]
        b = None if boot is None else replace(boot, seed=_sub_seed(boot.seed, BOOT_STREAM, j))
        res = evaluate_series(hist, methods, bw, b, _sub_seed(seed, j), M)
        if include_rampfit:
            try:
                rf = rampfit(hist)
                res["RAMPFIT"] = (rf.predict(window_w + 1), None)
            except Exception as exc:
                res["RAMPFIT"] = exc
        for name in names:
            rec, val = records[name], res[name]
            if isinstance(val, Exception):
                rec.failures += 1
                continue
            rec.predictions.append(val[0])
            rec.truths.append(truth)
            if val[1] is not None:
                rec.intervals.append(val[1])
    rows, excluded = {}, {}
    for name in names:
        rec = records[name]
        excluded[name] = rec.failures
        if rec.predictions:
            iv = rec.intervals if rec.intervals and len(rec.intervals) == len(rec.predictions) else None
            rows[name] = score(rec.predictions, rec.truths, iv)
    return StudyResult(rows, excluded, used_bw, records)
