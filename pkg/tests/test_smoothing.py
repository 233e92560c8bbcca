import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsforecast.kernels import (KernelFamily, KernelSpec, Scheme, kernel_values, weight_matrix,
                                weight_rows)
from lsforecast.smoothing import FitMode, extrapolate, fit_trend


def brute_nw(y, t, b, fitted):
    """Loop oracle for the one-sided Nadaraya-Watson mean at time t (1-based)."""
    T = t if fitted else t - 1
    T = max(T, 3)
    num = den = 0.0
    for i in range(1, y.size + 1):
        if i <= T and abs(t - i) <= b:
            k = 0.75 * (1 - ((t - i) / b) ** 2)
            num += k * y[i - 1]
            den += k
    return num / den


def brute_ll(y, t, b, fitted):
    """Weighted least-squares line at t, solved directly."""
    T = max(t if fitted else t - 1, 3)
    idx = [i for i in range(1, y.size + 1) if i <= T and abs(t - i) <= b]
    k = np.array([0.75 * (1 - ((t - i) / b) ** 2) for i in idx])
    X = np.column_stack([np.ones(len(idx)), np.array(idx, float) - t])
    W = np.diag(k)
    beta = np.linalg.solve(X.T @ W @ X, X.T @ W @ y[np.array(idx) - 1])
    return beta[0]


def test_kernel_values():
    assert kernel_values(KernelFamily.EPANECHNIKOV, 0.0) == 0.75
    assert kernel_values(KernelFamily.EPANECHNIKOV, 1.5) == 0.0
    assert kernel_values(KernelFamily.TRIANGULAR, 0.5) == 0.5
    assert kernel_values(KernelFamily.UNIFORM, -1.0) == 0.5


def test_bandwidth_minimum():
    with pytest.raises(ValueError):
        KernelSpec(bandwidth_b=1.5)


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("fitted", [True, False])
def test_weights_sum_to_one(scheme, fitted):
    w = weight_matrix(80, KernelSpec(bandwidth_b=9.5), scheme, fitted, 80.0 ** -2)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("fitted", [True, False])
def test_weights_are_one_sided(fitted):
    w = weight_matrix(50, KernelSpec(bandwidth_b=7), Scheme.LL, fitted)
    for t in range(5, 52):
        T = t if fitted else t - 1
        assert np.all(w[t - 1, T:] == 0)


def test_nonnegative_schemes():
    for s in (Scheme.NW, Scheme.LLH):
        assert weight_matrix(60, KernelSpec(bandwidth_b=12), s, False).min() >= 0


def test_weight_matrix_is_read_only():
    w = weight_matrix(30, KernelSpec(bandwidth_b=5), Scheme.NW, True)
    with pytest.raises(ValueError):
        w[0, 0] = 1.0


@pytest.mark.parametrize("fitted", [True, False])
def test_nw_matches_loop_oracle(fitted):
    # [DERIVED] oracle: explicit loop over the kernel window
    y = np.random.default_rng(0).standard_normal(40)
    fit = fit_trend(y, KernelSpec(bandwidth_b=6.5), FitMode.of("LC", fitted), heteroscedastic=False)
    for t in (4, 10, 25, 41):
        assert fit.mu[t - 1] == pytest.approx(brute_nw(y, t, 6.5, fitted), abs=1e-12)


@pytest.mark.parametrize("fitted", [True, False])
def test_ll_matches_weighted_least_squares(fitted):
    # [DERIVED] oracle: normal equations of the kernel-weighted line
    y = np.random.default_rng(1).standard_normal(40)
    fit = fit_trend(y, KernelSpec(bandwidth_b=8), FitMode.of("LL", fitted), heteroscedastic=False)
    for t in (10, 25, 41):
        assert fit.mu[t - 1] == pytest.approx(brute_ll(y, t, 8, fitted), abs=1e-10)


@pytest.mark.parametrize("mode", [FitMode.LL_REGULAR, FitMode.LL_PREDICTIVE])
def test_ll_reproduces_affine(mode):
    t = np.arange(1, 201, dtype=float)
    y = 0.3 - 0.02 * t
    fit = fit_trend(y, KernelSpec(bandwidth_b=15), mode, heteroscedastic=False)
    tt = np.arange(1, 202, dtype=float)[fit.start - 1:]
    np.testing.assert_allclose(fit.mu_hat, 0.3 - 0.02 * tt, atol=1e-10)


def test_nw_predictive_lags_a_trend():
    t = np.arange(1, 101, dtype=float)
    fit = fit_trend(t, KernelSpec(bandwidth_b=10), FitMode.NW_PREDICTIVE, heteroscedastic=False)
    mu, _ = extrapolate(fit)
    assert mu < 100


def test_scale_estimate_and_residuals():
    rng = np.random.default_rng(2)
    y = 2.0 * rng.standard_normal(3000)
    fit = fit_trend(y, KernelSpec(bandwidth_b=200), FitMode.NW_REGULAR, heteroscedastic=True)
    assert np.median(fit.sigma_hat) == pytest.approx(2.0, rel=0.1)
    assert fit.residuals.size == y.size - fit.start + 1


def test_constant_series_floor():
    fit = fit_trend(np.full(50, 3.0), KernelSpec(bandwidth_b=5), FitMode.LL_REGULAR)
    assert np.all(fit.sigma > 0)
    np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-6)


def test_too_short():
    with pytest.raises(ValueError):
        fit_trend(np.arange(10.0), KernelSpec(bandwidth_b=9), FitMode.LL_REGULAR)


@settings(max_examples=30, deadline=None)
@given(st.floats(2.0, 30.0), st.integers(40, 120), st.sampled_from(list(Scheme)),
       st.booleans())
def test_weights_property(b, n, scheme, fitted):
    times = np.arange(1, n + 1, dtype=float)
    w = weight_rows(times, np.arange(1, n + 2, dtype=float), KernelSpec(bandwidth_b=b),
                    scheme, fitted, float(n) ** -2)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.isfinite(w))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-0.1, 0.1), st.floats(4.0, 25.0))
def test_affine_reproduction_property(a, c, b):
    t = np.arange(1, 121, dtype=float)
    fit = fit_trend(a + c * t, KernelSpec(bandwidth_b=b), FitMode.LL_PREDICTIVE,
                    heteroscedastic=False)
    tt = np.arange(1, 122, dtype=float)[fit.start - 1:]
    np.testing.assert_allclose(fit.mu_hat, a + c * tt, atol=1e-10)


def test_ll_falls_back_to_nw_with_two_points():
    # predictive window at b=3 holds only two positive weights
    y = np.arange(1, 41, dtype=float)
    ll = fit_trend(y, KernelSpec(bandwidth_b=3), FitMode.LL_PREDICTIVE, heteroscedastic=False)
    nw = fit_trend(y, KernelSpec(bandwidth_b=3), FitMode.NW_PREDICTIVE, heteroscedastic=False)
    np.testing.assert_allclose(ll.mu_hat, nw.mu_hat)
