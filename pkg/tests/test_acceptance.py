"""Acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL/SKIP line that is printed in the terminal
summary.  Seeds are fixed up front and were not tuned.
"""
import os
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import toeplitz
from scipy.special import ndtri

from lsforecast.bootstrap import BootstrapConfig, mb_roots, mf_roots
from lsforecast.covariance import ToeplitzCovariance, pd_correct, whiten_solve
from lsforecast.diagnostics import ks_statistic
from lsforecast.distribution import DistKind, MarginalField, TMode
from lsforecast.harness import (parse_methods, run_moving_window, run_simulation_study,
                                select_bandwidth)
from lsforecast.kernels import KernelSpec, Scheme, weight_matrix
from lsforecast.linear_prediction import fit_ar_yw, levinson_durbin, sample_autocov
from lsforecast.predictors import MethodDescriptor, predict
from lsforecast.rampfit import ramp, rampfit
from lsforecast.series import GeneratorKind, GeneratorSpec, generate, ingest_csv
from lsforecast.smoothing import FitMode, fit_trend
from lsforecast.transform import CovKind, TransformConfig, forward

pytestmark = [pytest.mark.acceptance]

SEED = 20240601


def _finish(report, cid, checks):
    """Report and assert a list of ``(label, ok, detail)`` checks."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{lab}={det}{'' if good else ' [miss]'}" for lab, good, det in checks)
    report(cid, "PASS" if ok else "FAIL", detail)
    assert ok, detail


@pytest.mark.slow
def test_criterion_1_ar5_point_prediction(report):
    res = run_simulation_study("AR5", R=200, n=1000, seed=SEED)
    mb, mf = res.rows["MB-LL-P"], res.rows["MF-LLM-P"]
    worst = max(res.rows, key=lambda k: abs(res.rows[k].bias))
    checks = [
        ("MB-LL-P mse", 0.020 <= mb.mse <= 0.038, f"{mb.mse:.4g}"),
        ("MF-LLM-P mse", 0.020 <= mf.mse <= 0.038, f"{mf.mse:.4g}"),
        ("max|bias|", abs(res.rows[worst].bias) < 0.08, f"{res.rows[worst].bias:.3g} ({worst})"),
        ("rows", len(res.rows) == 28, str(len(res.rows))),
    ]
    _finish(report, "CRITERION 1", checks)


@pytest.mark.slow
def test_criterion_2_ar5_intervals(report):
    boot = BootstrapConfig(B=100, alpha=0.1, seed=SEED)
    mf = run_simulation_study("AR5", parse_methods(["MF-LLM-P"]), R=100, n=1000, boot=boot,
                              seed=SEED).rows["MF-LLM-P"]
    runs, below = 10, 0
    for k in range(runs):
        r = run_simulation_study("AR5", parse_methods(["MB-LC"]), R=100, n=1000,
                                 boot=BootstrapConfig(B=100, alpha=0.1, seed=SEED + 1000 + k),
                                 seed=SEED + 1000 + k)
        below += r.rows["MB-LC-F"].cvr < r.rows["MB-LC-P"].cvr
    checks = [
        ("MF-LLM-P cvr", 0.82 <= mf.cvr <= 0.96, f"{mf.cvr:.3g}"),
        ("MF-LLM-P length", 0.60 <= mf.mean_length <= 0.90, f"{mf.mean_length:.4g}"),
        ("MB-LC F<P runs", below >= 0.7 * runs, f"{below}/{runs}"),
    ]
    _finish(report, "CRITERION 2", checks)


@pytest.mark.slow
def test_criterion_3_tar_directional(report):
    res = run_simulation_study("TAR1", parse_methods(["MB-LL-P", "MF-LLM-P", "MF-LLM-ARMA-P"]),
                               R=200, n=1000, seed=SEED)
    arma, mb, mf = (res.rows[k].mse for k in ("MF-LLM-ARMA-P", "MB-LL-P", "MF-LLM-P"))
    checks = [
        ("ARMA<MB-LL", arma < mb, f"{arma:.4g} vs {mb:.4g}"),
        ("MF-LLM-P mse", abs(mf / 0.8208 - 1) <= 0.20, f"{mf:.4g}"),
    ]
    _finish(report, "CRITERION 3", checks)


def _speleothem_path():
    env = os.environ.get("LSFORECAST_SPELEOTHEM")
    candidates = [Path(env)] if env else []
    candidates += [Path(__file__).resolve().parents[1] / "data" / "1-7.txt"]
    return next((p for p in candidates if p.is_file()), None)


@pytest.mark.slow
def test_criterion_4_speleothem(report):
    path = _speleothem_path()
    if path is None:
        report("CRITERION 4", "SKIP", "dataset absent (set LSFORECAST_SPELEOTHEM)")
        pytest.skip("speleothem dataset absent")
    s = ingest_csv(path).tail(270)
    y = s.values
    m = MethodDescriptor.parse("mf-llm-ar")
    mf = predict(y, m, select_bandwidth(y, m), seed=SEED).point
    rf = rampfit(y)
    rp = rf.predict(y.size + 1)
    win = run_moving_window(y, 189, 62, methods=[m], seed=SEED).rows["RAMPFIT"]
    checks = [
        ("MF-LLM-ARMA point", abs(mf + 0.81) <= 0.05, f"{mf:.4g}"),
        ("RAMPFIT point", abs(rp + 0.81) <= 0.05, f"{rp:.4g}"),
        ("RAMPFIT window mse", abs(win.mse / 3.913e-2 - 1) <= 0.25, f"{win.mse:.4g}"),
    ]
    _finish(report, "CRITERION 4", checks)


def test_criterion_5_property_suite(report):
    checks = []
    y = generate(GeneratorSpec(GeneratorKind.AR5_SINE, 300, seed=SEED)).values

    err = 0.0
    for cov in CovKind:
        st = forward(y, TransformConfig(KernelSpec(bandwidth_b=30), DistKind.LC_STEP,
                                        TMode.FITTED, cov))
        err = max(err, np.abs(st.inverse(st.epsilon) - y).max())
    checks.append(("step round trip", err <= 1e-8, f"{err:.2e}"))

    st = forward(y, TransformConfig(KernelSpec(bandwidth_b=30), DistKind.LLM, TMode.FITTED))
    steps = np.abs(st.inverse(st.epsilon) - y).max() / st.field.grid_step
    checks.append(("LLM round trip steps", steps <= 2, f"{steps:.3g}"))

    worst_end, worst_mass, mono = 0.0, 0.0, True
    for mode in TMode:
        fld = MarginalField(y, DistKind.LLM, mode, KernelSpec(bandwidth_b=25), h0=0.05)
        mono &= bool(np.all(np.diff(fld.cdf, axis=1) >= 0))
        worst_end = max(worst_end, np.abs(fld.cdf[:, 0]).max(), np.abs(fld.cdf[:, -1] - 1).max())
        for t in (10, 150, 301):
            _, dens = fld.estimate(t).density()
            worst_mass = max(worst_mass, abs(dens.sum() * fld.grid_step - 1))
    checks.append(("LLM monotone", mono, str(mono)))
    checks.append(("LLM endpoints", worst_end <= 1e-6, f"{worst_end:.2e}"))
    checks.append(("LLM mass", worst_mass <= 1e-6, f"{worst_mass:.2e}"))

    rng = np.random.default_rng(SEED)
    rec = 0.0
    for _ in range(200):
        g = np.concatenate([[1.0], rng.uniform(-1, 1, rng.integers(1, 25))])
        cov = pd_correct(g, int(rng.integers(2, 30)))
        np.linalg.cholesky(cov.matrix())
        rec = max(rec, np.abs(cov.chol @ cov.chol.T - cov.matrix()).max())
    checks.append(("pd_correct CC'", rec <= 1e-9, f"{rec:.2e}"))

    ld = 0.0
    for p in range(1, 21):
        g = sample_autocov(rng.standard_normal(400), p).gamma
        phis, _ = levinson_durbin(g, p)
        ld = max(ld, np.abs(phis[p] - np.linalg.solve(toeplitz(g[:p]), g[1:p + 1])).max())
    checks.append(("Levinson vs direct", ld <= 1e-8, f"{ld:.2e}"))

    t = np.arange(1, 201, dtype=float)
    aff = 0.0
    for mode in (FitMode.LL_REGULAR, FitMode.LL_PREDICTIVE):
        for b in (4, 15, 60):
            fit = fit_trend(0.3 - 0.02 * t, KernelSpec(bandwidth_b=b), mode, False)
            tt = np.arange(1, 202, dtype=float)[fit.start - 1:]
            aff = max(aff, np.abs(fit.mu_hat - (0.3 - 0.02 * tt)).max())
    checks.append(("LL affine", aff <= 1e-10, f"{aff:.2e}"))

    wsum = 0.0
    for scheme in Scheme:
        for fitted in (True, False):
            w = weight_matrix(80, KernelSpec(bandwidth_b=9.5), scheme, fitted, 80.0 ** -2)
            wsum = max(wsum, np.abs(w.sum(axis=1) - 1).max())
    checks.append(("weights sum", wsum <= 1e-12, f"{wsum:.2e}"))

    tr = np.arange(1, 121, dtype=float)
    x = ramp(tr, 40.0, 75.0, -0.4, 1.3)
    rf = rampfit(x)
    rerr = max(abs(rf.x1 + 0.4), abs(rf.x2 - 1.3), np.abs(rf.predict(tr) - x).max())
    checks.append(("RAMPFIT recovery", rerr <= 1e-9 and (rf.t1, rf.t2) == (40.0, 75.0),
                   f"{rerr:.2e}"))

    kern = KernelSpec(bandwidth_b=40)
    cfg = TransformConfig(kern)
    mb = [mb_roots(y, kern, FitMode.LL_PREDICTIVE, BootstrapConfig(B=16, seed=3, workers=w)).roots
          for w in (1, 2, 8)]
    mf = [mf_roots(y, cfg, BootstrapConfig(B=8, seed=3, workers=w)).roots for w in (1, 2, 8)]
    same = all(np.array_equal(mb[0], r) for r in mb) and all(np.array_equal(mf[0], r) for r in mf)
    checks.append(("bootstrap workers 1/2/8", same, str(same)))

    _finish(report, "CRITERION 5", checks)


def test_criterion_6_statistical_oracles(report):
    # correctly specified whitening: true unit-variance AR(1) covariance
    phi, n, trials = 0.5, 500, 100
    cov = ToeplitzCovariance(phi ** np.arange(n, dtype=float))
    passes = 0
    for k in range(trials):
        rng = np.random.default_rng([SEED, k])
        z = np.empty(n)
        z[0] = rng.standard_normal()
        e = rng.standard_normal(n) * np.sqrt(1 - phi ** 2)
        for t in range(1, n):
            z[t] = phi * z[t - 1] + e[t]
        passes += ks_statistic(whiten_solve(cov, z))[1] > 0.01
    rng = np.random.default_rng(SEED)
    x = np.zeros(5300)
    e = rng.standard_normal(5300)
    for t in range(1, 5300):
        x[t] = phi * x[t - 1] + e[t]
    fit = fit_ar_yw(x[300:], p_max=10)
    checks = [
        ("KS passes", passes >= 95, f"{passes}/{trials}"),
        ("YW phi1", abs(fit.phi[0] - 0.5) <= 0.05, f"{fit.phi[0]:.4f}"),
    ]
    _finish(report, "CRITERION 6", checks)
