"""Bandwidth selection by one-step-ahead cross-validation.

All one-sided estimators here are prefix consistent: the fit at ``t`` uses
only observations up to ``t`` (or ``t-1``).  So a single fit on the full
series supplies, for every origin ``k``, exactly what a refit on
``Y_1..Y_k`` would produce, and no future value enters a prediction.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr, ndtri

from .covariance import whiten_solve
from .diagnostics import ks_stat_uniform
from .distribution import DistKind, MarginalField, TMode, final_h0, initial_h0
from .kernels import KernelFamily, KernelSpec
from .linear_prediction import ar_predict, fit_ar_yw
from .series import TimeSeries
from .smoothing import FitMode, fit_trend
from .transform import CovKind, clamp_u, estimate_covariance

MIN_RESID = 14


class CVLoss(str, enum.Enum):
    PRESS = "PRESS"
    PRESAR = "PRESAR"


@dataclass(frozen=True)
class CVResult:
    b: float
    h0: Optional[float]
    losses: dict
    survivors: tuple = ()
    ks: dict = field(default_factory=dict)


def default_grid(n: int, q: int = 10) -> NDArray:
    """``q`` log-spaced bandwidths in ``[n^0.5, n^0.9]``."""
    return np.geomspace(n ** 0.5, n ** 0.9, q)


def _values(series) -> NDArray:
    return np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)


def _origins(lo: int, n: int, max_origins: Optional[int]) -> NDArray:
    if lo > n - 1:
        raise ValueError("series too short for cross-validation at these bandwidths")
    ks = np.arange(lo, n)
    if max_origins is not None and ks.size > max_origins:
        ks = np.unique(np.linspace(lo, n - 1, max_origins).round().astype(int))
    return ks


def _loss(err: NDArray, loss: CVLoss) -> float:
    return float(np.sum(err ** 2) if CVLoss(loss) is CVLoss.PRESS else np.sum(np.abs(err)))


def _argmin(grid: Sequence[float], losses: Sequence[float], atol: float = 0.0) -> int:
    """Index of the smallest loss; losses within ``atol`` of it tie, smaller ``b`` wins."""
    losses = np.asarray(losses, dtype=float)
    best = np.flatnonzero(losses <= np.nanmin(losses) + atol)
    return int(best[np.argmin(np.asarray(grid, dtype=float)[best])])


def _tie_tol(y: NDArray, m: int, loss: CVLoss) -> float:
    # rounding-level differences on the scale of the data count as ties
    ms = max(float(np.mean(y * y)), 1e-300)
    return m * (1e-20 * ms if CVLoss(loss) is CVLoss.PRESS else 1e-10 * np.sqrt(ms))


def cv_mb(series, b_grid: Optional[Sequence[float]] = None, loss: CVLoss = CVLoss.PRESS,
          k0: Optional[int] = None, smoother: str = "LL", fitted: bool = False,
          quick: bool = False, max_origins: Optional[int] = None,
          heteroscedastic: bool = False,
          family: KernelFamily = KernelFamily.EPANECHNIKOV) -> CVResult:
    """Choose the model-based bandwidth by sequential one-step prediction.

    Parameters
    ----------
    series : TimeSeries or array
    b_grid : sequence of float
        Candidates; defaults to :func:`default_grid`.
    loss : CVLoss
        Sum of squared (PRESS) or absolute (PRESAR) prediction errors.
    k0 : int
        First origin; ``ceil(sqrt(n))`` by default.  Origins are shared
        across candidates so losses are comparable.
    smoother, fitted : str, bool
        Which trend fit produces the residuals.
    quick : bool
        Predict by the trend alone instead of trend plus AR residual predictor.
    max_origins : int, optional
        Evaluate an evenly spaced subset of origins.
    """
    y = _values(series)
    n = y.size
    grid = sorted(float(b) for b in (default_grid(n) if b_grid is None else b_grid))
    if not grid:
        raise ValueError("empty bandwidth grid")
    if len(grid) == 1:
        return CVResult(grid[0], None, {grid[0]: float("nan")})
    k0 = int(np.ceil(np.sqrt(n))) if k0 is None else int(k0)
    lo = max(k0, int(np.floor(max(grid))) + (1 if quick else MIN_RESID))
    ks = _origins(lo, n, max_origins)
    mode = FitMode.of(smoother, fitted)
    pmode = FitMode.of(smoother, False)
    losses = {}
    for b in grid:
        kern = KernelSpec(family, b)
        pfit = fit_trend(y, kern, pmode, heteroscedastic)
        # at t = k+1 the prefix fit equals the predictive formula
        mu_next, sig_next = pfit.mu[ks], pfit.sigma[ks]
        if quick:
            pred = mu_next
        else:
            fit = pfit if mode is pmode else fit_trend(y, kern, mode, heteroscedastic)
            resid = fit.residuals_all()
            s0 = fit.start - 1
            pred = np.empty(ks.size)
            for j, k in enumerate(ks):
                w = resid[s0:k]
                ar = fit_ar_yw(w)
                pred[j] = mu_next[j] + sig_next[j] * ar_predict(ar, w)
        losses[b] = _loss(pred - y[ks], loss)
    best = grid[_argmin(grid, [losses[b] for b in grid], _tie_tol(y, ks.size, loss))]
    return CVResult(best, None, losses)


def ks_prescreen(y: NDArray, grid: Sequence[float], dist_kind: DistKind, T_mode: TMode,
                 family: KernelFamily = KernelFamily.EPANECHNIKOV) -> dict:
    """KS distance of the uniformized series from U[0,1] per candidate bandwidth."""
    out = {}
    for b in grid:
        h0 = initial_h0(y, b) if DistKind(dist_kind).smooth else None
        f = MarginalField(y, dist_kind, T_mode, KernelSpec(family, b), h0)
        out[b] = ks_stat_uniform(f.diag())
    return out


def mf_cv_loss(y: NDArray, b: float, dist_kind: DistKind, T_mode: TMode, cov_kind: CovKind,
               ks: NDArray, loss: CVLoss, h0: Optional[float],
               family: KernelFamily = KernelFamily.EPANECHNIKOV) -> float:
    """One-step-ahead loss of the model-free L2 predictor at origins ``ks``."""
    kern = KernelSpec(family, b)
    fld = MarginalField(y, dist_kind, T_mode, kern, h0)
    nxt = fld if T_mode is TMode.PREDICTIVE else MarginalField(y, dist_kind, TMode.PREDICTIVE, kern, h0)
    u_all = fld.diag()
    err = np.empty(ks.size)
    for j, k in enumerate(ks):
        z = ndtri(clamp_u(u_all[:k], k))
        cov_ext, _ = estimate_covariance(z, cov_kind)
        eps = whiten_solve(cov_ext.leading(k), z)
        c = cov_ext.chol[-1]
        shift = float(c[:-1] @ eps)
        # row k+1 with data up to k: the predictive estimate at k+1
        g = nxt.quantile_row(k + 1, ndtr(shift + c[-1] * eps))
        err[j] = float(np.mean(g)) - y[k]
    return _loss(err, loss)


def cv_mf(series, b_grid: Optional[Sequence[float]] = None, keep_p: int = 3,
          dist_kind: DistKind = DistKind.LLM, loss: CVLoss = CVLoss.PRESS,
          T_mode: TMode = TMode.PREDICTIVE, cov_kind: CovKind = CovKind.FLAT_TOP,
          k0: Optional[int] = None, max_origins: Optional[int] = 50,
          family: KernelFamily = KernelFamily.EPANECHNIKOV) -> CVResult:
    """KS-prescreened cross-validation for the model-free transform.

    Candidates whose uniformized series is closest to U[0,1] survive the
    prescreen (skipped when ``n < 300``); the survivor with the smallest
    one-step-ahead loss of the model-free predictor wins.  Returns the chosen
    ``b`` and the final secondary bandwidth ``(b/n)^2`` on the data scale.
    """
    y = _values(series)
    n = y.size
    dist_kind, T_mode, cov_kind = DistKind(dist_kind), TMode(T_mode), CovKind(cov_kind)
    grid = sorted(float(b) for b in (default_grid(n) if b_grid is None else b_grid))
    if not grid:
        raise ValueError("empty bandwidth grid")
    if len(grid) == 1:
        b = grid[0]
        return CVResult(b, final_h0(y, b) if dist_kind.smooth else None, {b: float("nan")}, (b,))
    ks_stats = {}
    if n >= 300 and keep_p < len(grid):
        ks_stats = ks_prescreen(y, grid, dist_kind, T_mode, family)
        order = sorted(range(len(grid)), key=lambda i: (ks_stats[grid[i]], i))
        survivors = sorted(grid[i] for i in order[:max(keep_p, 1)])
    else:
        survivors = list(grid)
    k0 = int(np.ceil(np.sqrt(n))) if k0 is None else int(k0)
    lo = max(k0, int(np.floor(max(survivors))) + MIN_RESID)
    ks = _origins(lo, n, max_origins)
    losses = {}
    for b in survivors:
        h0 = initial_h0(y, b) if dist_kind.smooth else None
        losses[b] = mf_cv_loss(y, b, dist_kind, T_mode, cov_kind, ks, loss, h0, family)
    best = survivors[_argmin(survivors, [losses[b] for b in survivors], _tie_tol(y, ks.size, loss))]
    return CVResult(best, final_h0(y, best) if dist_kind.smooth else None, losses,
                    tuple(survivors), ks_stats)
