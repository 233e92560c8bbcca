"""Bootstrap prediction intervals and double-bootstrap bandwidth calibration.

Each replicate draws from its own stream keyed by ``(seed, replicate)``, so
the roots do not depend on how replicates are distributed over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .kernels import KernelSpec
from .linear_prediction import ar_predict, fit_ar_yw
from .predictors import (Family, Loss, MethodDescriptor, PredictionOutcome, fit_mb, lmf_draws,
                         reduce_loss)
from .series import TimeSeries, rng_stream
from .smoothing import FitMode, extrapolate, fit_trend
from .transform import MFState, TransformConfig, forward, g_apply, shift_for

ROOT_STREAM = 0x524F4F54
OUTER_STREAM = 0x4F555452


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings shared by the interval engines.

    ``b_prime=None`` re-estimates with the outer bandwidth.  ``refit_order``
    re-selects the AR order by AIC inside each replicate; otherwise the order
    found on the original data is kept.
    """

    B: int = 250
    alpha: float = 0.1
    b_prime: Optional[float] = None
    seed: int = 0
    C: int = 50
    M: int = 1000
    workers: int = 1
    refit_order: bool = False

    def __post_init__(self):
        if self.B < 1 or self.C < 1:
            raise ValueError("B and C must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class PredictiveRootSample:
    roots: NDArray
    predictor_pi: float

    def interval(self, alpha: float) -> tuple:
        return root_interval(self.predictor_pi, self.roots, alpha)


def order_stat(x: NDArray, beta: float) -> float:
    """Empirical ``beta``-quantile: order statistic ``ceil(beta * B)``."""
    s = np.sort(x)
    k = min(max(int(math.ceil(beta * s.size - 1e-9)), 1), s.size)
    return float(s[k - 1])


def root_interval(pi: float, roots: NDArray, alpha: float) -> tuple:
    return (pi + order_stat(roots, alpha / 2), pi + order_stat(roots, 1 - alpha / 2))


def _run(fn: Callable[[int], float], B: int, workers: int) -> NDArray:
    if workers <= 1:
        return np.array([fn(r) for r in range(B)], dtype=float)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return np.array(list(ex.map(fn, range(B))), dtype=float)


def _values(series) -> NDArray:
    return np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)


# --- model-based forward bootstrap -----------------------------------------

@dataclass(frozen=True)
class MBWorld:
    """What a model-based replicate needs from the original fit."""

    y: NDArray
    mu: NDArray
    sigma: NDArray
    w_check: NDArray     # residuals for t = start..n
    start: int
    phi: NDArray
    v_centered: NDArray
    point: float


def _mb_world(y: NDArray, kernel: KernelSpec, mode: FitMode, heteroscedastic: bool) -> MBWorld:
    model = fit_mb(y, kernel, mode, heteroscedastic)
    v = model.ar.residuals_V
    v = v - v.mean() if v.size else np.zeros(1)
    return MBWorld(y, np.asarray(model.fit.mu), np.asarray(model.fit.sigma),
                   np.asarray(model.fit.residuals), model.fit.start, model.ar.phi, v, model.point)


def _mb_pseudo_noise(world: MBWorld, rng: np.random.Generator, length: int) -> NDArray:
    """AR recursion driven by resampled residuals, from a random observed block."""
    p = world.phi.size
    n = world.y.size
    vstar = rng.choice(world.v_centered, size=length)
    # I uniform on {p+b, ..., n}: the block W_{I-p+1..I} lies inside the residual range
    lo = world.start - 1 + p
    i = int(rng.integers(lo, n + 1))
    w = np.empty(p + length)
    w[:p] = world.w_check[i - p - (world.start - 1):i - (world.start - 1)] if p else w[:0]
    for t in range(length):
        w[p + t] = (world.phi @ w[t:t + p][::-1] if p else 0.0) + vstar[t]
    return w[p:], vstar


def _mb_root(world: MBWorld, kernel_prime: KernelSpec, mode: FitMode, heteroscedastic: bool,
             order: Optional[int], rng: np.random.Generator) -> float:
    n = world.y.size
    wstar, vstar = _mb_pseudo_noise(world, rng, n + 1)
    ystar = world.mu[:n] + world.sigma[:n] * wstar[:n]
    fit = fit_trend(ystar, kernel_prime, mode, heteroscedastic)
    ar = fit_ar_yw(fit.residuals, order=order)
    mu_s, sig_s = extrapolate(fit)
    # forward bootstrap: condition on the ORIGINAL last residuals
    pi_star = mu_s + sig_s * ar_predict(ar, world.w_check)
    p = world.phi.size
    base = float(world.phi @ world.w_check[-p:][::-1]) if p else 0.0
    y_next = world.mu[n] + world.sigma[n] * (base + vstar[n])
    return y_next - pi_star


def mb_roots(series, kernel: KernelSpec, mode: FitMode, boot: BootstrapConfig,
             heteroscedastic: bool = False) -> PredictiveRootSample:
    y = _values(series)
    world = _mb_world(y, kernel, FitMode(mode), heteroscedastic)
    kp = KernelSpec(kernel.family, boot.b_prime or kernel.bandwidth_b)
    order = None if boot.refit_order else world.phi.size

    def one(r: int) -> float:
        return _mb_root(world, kp, FitMode(mode), heteroscedastic, order,
                        rng_stream(boot.seed, ROOT_STREAM, r))

    return PredictiveRootSample(_run(one, boot.B, boot.workers), world.point)


def interval_mb(series, kernel: KernelSpec, mode: FitMode, boot: BootstrapConfig,
                heteroscedastic: bool = False,
                method: Optional[MethodDescriptor] = None) -> PredictionOutcome:
    """Model-based forward bootstrap interval around ``Pi``."""
    rs = mb_roots(series, kernel, mode, boot, heteroscedastic)
    lo, hi = rs.interval(boot.alpha)
    return PredictionOutcome(rs.predictor_pi, method, (lo, hi, boot.alpha),
                             {"roots": rs.roots.tolist(), "B": boot.B,
                              "bandwidth_b": float(kernel.bandwidth_b),
                              "b_prime": float(boot.b_prime or kernel.bandwidth_b)})


# --- model-free bootstrap --------------------------------------------------

def _mf_point(state: MFState, shift: float, innov: NDArray, loss: Loss) -> float:
    return reduce_loss(g_apply(state.field, shift, state.c_last, innov), loss)


def mf_roots(series, config: TransformConfig, boot: BootstrapConfig, loss: Loss = Loss.L2,
             limit: bool = False, state: Optional[MFState] = None) -> PredictiveRootSample:
    """Roots ``Y*_{n+1} - Pi(g*, Y_n)`` of the (limit) model-free bootstrap.

    With ``limit=False`` pseudo-innovations are resampled from the fitted
    ones; with ``limit=True`` they are i.i.d. N(0,1) and predictors use a
    fixed set of ``M`` normal draws.
    """
    y = _values(series)
    n = y.size
    if state is None:
        state = forward(y, config)
    innov = lmf_draws(boot.seed, boot.M) if limit else np.asarray(state.epsilon)
    pi = _mf_point(state, state.shift, innov, loss)
    cfg_prime = config if boot.b_prime is None else config.with_bandwidth(boot.b_prime, config.h0)
    # the secondary bandwidth stays at the value used on the original data
    if cfg_prime.h0 is None:
        cfg_prime = replace(cfg_prime, h0=state.field.h0)

    def one(r: int) -> float:
        rng = rng_stream(boot.seed, ROOT_STREAM, r)
        if limit:
            estar, enext = rng.standard_normal(n), rng.standard_normal()
        else:
            estar, enext = rng.choice(state.epsilon, size=n), rng.choice(state.epsilon)
        ystar = state.inverse(estar)
        y_next = float(state.g(enext)[0])
        st = forward(ystar, cfg_prime)
        shift = shift_for(st, y)
        inn = innov if limit else np.asarray(state.epsilon)
        return y_next - _mf_point(st, shift, inn, loss)

    return PredictiveRootSample(_run(one, boot.B, boot.workers), pi)


def interval_mf(series, config: TransformConfig, boot: BootstrapConfig, loss: Loss = Loss.L2,
                method: Optional[MethodDescriptor] = None, limit: bool = False) -> PredictionOutcome:
    """Model-free bootstrap interval (resampled innovations)."""
    rs = mf_roots(series, config, boot, loss, limit)
    lo, hi = rs.interval(boot.alpha)
    return PredictionOutcome(rs.predictor_pi, method, (lo, hi, boot.alpha),
                             {"roots": rs.roots.tolist(), "B": boot.B,
                              "bandwidth_b": config.b,
                              "b_prime": float(boot.b_prime or config.b)})


def interval_lmf(series, config: TransformConfig, boot: BootstrapConfig, loss: Loss = Loss.L2,
                 method: Optional[MethodDescriptor] = None) -> PredictionOutcome:
    """Limit model-free bootstrap interval (N(0,1) innovations)."""
    return interval_mf(series, config, boot, loss, method, limit=True)


def interval(series, method: MethodDescriptor, b: float, boot: BootstrapConfig,
             h0: Optional[float] = None, heteroscedastic: bool = False,
             grid_size: int = 512) -> PredictionOutcome:
    """Interval for any method of the matrix."""
    if method.is_mb:
        return interval_mb(series, KernelSpec(bandwidth_b=b), method.fit_mode(), boot,
                           heteroscedastic, method)
    cfg = method.transform_config(b, h0, grid_size=grid_size)
    return interval_mf(series, cfg, boot, method.loss, method,
                       limit=method.family is Family.LMF)


# --- double bootstrap ------------------------------------------------------

def _closest(grid: Sequence[float], cvr: Sequence[float], target: float) -> float:
    gap = np.abs(np.asarray(cvr) - target)
    best = np.flatnonzero(gap == gap.min())
    cands = np.asarray(grid, dtype=float)[best]
    return float(cands.min())


def calibrate_mb(series, kernel: KernelSpec, mode: FitMode, grid_b_prime: Sequence[float],
                 target_cvr: float = 0.9, B: int = 50, C: int = 50, seed: int = 0,
                 heteroscedastic: bool = False, alpha: Optional[float] = None,
                 return_cvr: bool = False):
    """Double bootstrap choice of the inner bandwidth for the model-based interval.

    The outer loop draws pseudo-series of length ``n+1`` from the fitted
    model.  For each, the first ``n`` values are treated as data and a
    ``C``-replicate interval is built per candidate ``b'``; coverage of the
    pseudo-future value is tallied.
    """
    grid = [float(g) for g in grid_b_prime]
    if not grid:
        raise ValueError("empty bandwidth grid")
    if len(grid) == 1 and not return_cvr:
        return grid[0]
    alpha = 1 - target_cvr if alpha is None else alpha
    y = _values(series)
    n = y.size
    world = _mb_world(y, kernel, FitMode(mode), heteroscedastic)
    hits = np.zeros(len(grid))
    for j in range(B):
        rng = rng_stream(seed, OUTER_STREAM, j)
        wstar, _ = _mb_pseudo_noise(world, rng, n + 1)
        ystar = world.mu + world.sigma * wstar
        for k, bp in enumerate(grid):
            boot = BootstrapConfig(B=C, alpha=alpha, b_prime=bp, seed=seed * 7919 + j + 1,
                                   refit_order=True)
            rs = mb_roots(ystar[:n], kernel, mode, boot, heteroscedastic)
            lo, hi = rs.interval(alpha)
            hits[k] += lo <= ystar[n] <= hi
    cvr = hits / B
    chosen = _closest(grid, cvr, target_cvr)
    return (chosen, cvr) if return_cvr else chosen


def calibrate_mf(series, config: TransformConfig, grid_b_prime: Sequence[float],
                 target_cvr: float = 0.9, B: int = 50, C: int = 50, seed: int = 0,
                 loss: Loss = Loss.L2, limit: bool = False, alpha: Optional[float] = None,
                 return_cvr: bool = False):
    """Double bootstrap choice of the inner bandwidth for the model-free interval."""
    grid = [float(g) for g in grid_b_prime]
    if not grid:
        raise ValueError("empty bandwidth grid")
    if len(grid) == 1 and not return_cvr:
        return grid[0]
    alpha = 1 - target_cvr if alpha is None else alpha
    y = _values(series)
    n = y.size
    state = forward(y, config)
    cfg = replace(config, h0=state.field.h0)
    hits = np.zeros(len(grid))
    for j in range(B):
        rng = rng_stream(seed, OUTER_STREAM, j)
        if limit:
            e = rng.standard_normal(n + 1)
        else:
            e = rng.choice(state.epsilon, size=n + 1)
        ystar = state.inverse_ext(e)
        for k, bp in enumerate(grid):
            boot = BootstrapConfig(B=C, alpha=alpha, b_prime=bp, seed=seed * 7919 + j + 1)
            rs = mf_roots(ystar[:n], cfg, boot, loss, limit)
            lo, hi = rs.interval(alpha)
            hits[k] += lo <= ystar[n] <= hi
    cvr = hits / B
    chosen = _closest(grid, cvr, target_cvr)
    return (chosen, cvr) if return_cvr else chosen


def calibrate_bandwidth_double_boot(series, method: MethodDescriptor, b: float,
                                    grid_b_prime: Sequence[float], target_cvr: float = 0.9,
                                    B: int = 50, C: int = 50, seed: int = 0, **kw) -> float:
    """Dispatch to the model-based or model-free calibrator."""
    if method.is_mb:
        return calibrate_mb(series, KernelSpec(bandwidth_b=b), method.fit_mode(), grid_b_prime,
                            target_cvr, B, C, seed, **kw)
    return calibrate_mf(series, method.transform_config(b), grid_b_prime, target_cvr, B, C, seed,
                        method.loss, method.family is Family.LMF, **kw)
