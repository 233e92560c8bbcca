import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsforecast import bootstrap as bs
from lsforecast.bootstrap import (BootstrapConfig, calibrate_bandwidth_double_boot, interval,
                                  interval_lmf, interval_mb, interval_mf, mb_roots, mf_roots,
                                  order_stat, root_interval)
from lsforecast.distribution import DistKind, TMode
from lsforecast.kernels import KernelSpec
from lsforecast.predictors import MethodDescriptor
from lsforecast.series import GeneratorKind, GeneratorSpec, generate
from lsforecast.smoothing import FitMode
from lsforecast.transform import TransformConfig


@pytest.fixture(scope="module")
def y():
    return generate(GeneratorSpec(GeneratorKind.AR5_SINE, 250, seed=21)).values


def test_order_stat_convention():
    x = np.arange(1.0, 101.0)
    assert order_stat(x, 0.05) == 5.0
    assert order_stat(x, 0.95) == 95.0
    assert order_stat(x, 0.0) == 1.0
    assert order_stat(x, 1.0) == 100.0
    assert order_stat(np.array([3.0, 1.0, 2.0]), 0.5) == 2.0


def test_constant_roots_give_zero_width():
    lo, hi = root_interval(1.5, np.zeros(50), 0.1)
    assert lo == hi == 1.5


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=5, max_size=200), st.floats(0.01, 0.3))
def test_intervals_nested(roots, alpha):
    r = np.array(roots)
    lo1, hi1 = root_interval(0.0, r, alpha)
    lo2, hi2 = root_interval(0.0, r, min(2 * alpha, 0.9))
    assert lo1 <= lo2 <= hi2 <= hi1


def test_config_validation():
    with pytest.raises(ValueError):
        BootstrapConfig(B=0)
    with pytest.raises(ValueError):
        BootstrapConfig(alpha=1.0)


@pytest.mark.parametrize("workers", [2, 8])
def test_mb_deterministic_across_workers(y, workers):
    kern = KernelSpec(bandwidth_b=40)
    a = mb_roots(y, kern, FitMode.LL_PREDICTIVE, BootstrapConfig(B=24, seed=3, workers=1))
    b = mb_roots(y, kern, FitMode.LL_PREDICTIVE, BootstrapConfig(B=24, seed=3, workers=workers))
    np.testing.assert_array_equal(a.roots, b.roots)


@pytest.mark.parametrize("workers", [2, 8])
def test_mf_deterministic_across_workers(y, workers):
    cfg = TransformConfig(KernelSpec(bandwidth_b=40))
    a = mf_roots(y, cfg, BootstrapConfig(B=16, seed=4, workers=1))
    b = mf_roots(y, cfg, BootstrapConfig(B=16, seed=4, workers=workers))
    np.testing.assert_array_equal(a.roots, b.roots)


def test_roots_keyed_by_replicate(y):
    kern = KernelSpec(bandwidth_b=40)
    short = mb_roots(y, kern, FitMode.LL_PREDICTIVE, BootstrapConfig(B=10, seed=5))
    long_ = mb_roots(y, kern, FitMode.LL_PREDICTIVE, BootstrapConfig(B=20, seed=5))
    np.testing.assert_array_equal(short.roots, long_.roots[:10])


def test_forward_conditioning_uses_original_residuals(y, monkeypatch):
    # instrumentation: every bootstrap predictor sees the original last residuals
    seen = []
    real = bs.ar_predict

    def spy(fit, recent):
        seen.append(np.array(recent, copy=True))
        return real(fit, recent)

    monkeypatch.setattr(bs, "ar_predict", spy)
    kern = KernelSpec(bandwidth_b=40)
    world = bs._mb_world(y, kern, FitMode.LL_PREDICTIVE, False)
    mb_roots(y, kern, FitMode.LL_PREDICTIVE, BootstrapConfig(B=5, seed=1))
    assert len(seen) == 5
    for s in seen:
        np.testing.assert_array_equal(s, world.w_check)


def test_mb_interval_outcome(y):
    out = interval_mb(y, KernelSpec(bandwidth_b=40), FitMode.LL_PREDICTIVE,
                      BootstrapConfig(B=50, seed=2))
    lo, hi, alpha = out.interval
    assert lo < out.point < hi
    assert alpha == 0.1
    assert 0.2 < hi - lo < 2.0


def test_mf_and_lmf_intervals(y):
    cfg = TransformConfig(KernelSpec(bandwidth_b=40))
    boot = BootstrapConfig(B=30, seed=2, M=200)
    a = interval_mf(y, cfg, boot)
    b = interval_lmf(y, cfg, boot)
    for out in (a, b):
        lo, hi, _ = out.interval
        assert lo <= hi
        assert np.all(np.isfinite(out.diagnostics["roots"]))


def test_interval_dispatch(y):
    out = interval(y, MethodDescriptor.parse("mb-lc-f"), 40, BootstrapConfig(B=20, seed=1))
    assert out.method.name == "MB-LC-F"


def test_calibrate_single_grid(y):
    m = MethodDescriptor.parse("mb-ll")
    assert calibrate_bandwidth_double_boot(y, m, 40, [33.0], B=50, C=50) == 33.0


def test_calibrate_returns_grid_member(y):
    m = MethodDescriptor.parse("mb-lc")
    b, cvr = calibrate_bandwidth_double_boot(y, m, 40, [20.0, 60.0], B=6, C=10, seed=3,
                                             return_cvr=True)
    assert b in (20.0, 60.0)
    assert cvr.shape == (2,)


@pytest.mark.slow
def test_identity_oracle_coverage():
    # [DERIVED] simulation: i.i.d. N(0,1) data, independence covariance
    rng = np.random.default_rng(0)
    cfg = TransformConfig(KernelSpec(bandwidth_b=110), DistKind.LC_SMOOTH, TMode.FITTED,
                          h0=0.1, band_l=0)
    hits = 0
    reps = 100
    for r in range(reps):
        z = rng.standard_normal(121)
        out = interval_mf(z[:120], cfg, BootstrapConfig(B=99, seed=r))
        lo, hi, _ = out.interval
        hits += lo <= z[120] <= hi
    assert abs(hits / reps - 0.9) <= 0.06
