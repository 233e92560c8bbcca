"""Weighted least-squares ramp regression with iterative variance re-estimation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .series import TimeSeries


@dataclass(frozen=True)
class RampFitResult:
    t1: float
    t2: float
    x1: float
    x2: float
    sigma: NDArray
    ssqw: float
    iterations: int
    converged: bool = True
    mse_path: tuple = ()

    def predict(self, t) -> NDArray:
        return ramp(t, self.t1, self.t2, self.x1, self.x2)


def ramp(t, t1: float, t2: float, x1: float, x2: float):
    """``x1`` before ``t1``, ``x2`` after ``t2``, linear in between."""
    t = np.asarray(t, dtype=float)
    r = np.clip((t - t1) / (t2 - t1), 0.0, 1.0)
    out = x1 + r * (x2 - x1)
    return float(out) if out.ndim == 0 else out


def rampfit_predict(result: RampFitResult, t_next) -> float:
    return result.predict(t_next)


def solve_levels(t: NDArray, x: NDArray, w: NDArray, t1: float, t2: float):
    """Weighted least-squares ``(x1, x2)`` for fixed breakpoints.

    The ramp is ``x1 (1 - r) + x2 r`` with ``r`` the clipped ramp position, so
    the levels solve a 2x2 weighted normal system.
    """
    r = np.clip((t - t1) / (t2 - t1), 0.0, 1.0)
    a = 1.0 - r
    m = np.array([[np.sum(w * a * a), np.sum(w * a * r)], [np.sum(w * a * r), np.sum(w * r * r)]])
    rhs = np.array([np.sum(w * a * x), np.sum(w * r * x)])
    return np.linalg.solve(m, rhs)


def _grid_search(t, x, w, pairs):
    """Vectorized closed-form levels and SSQW for all breakpoint pairs."""
    # levels and argmin are invariant to the weight scale; normalize against overflow
    wmax = float(np.max(w))
    w = w / wmax
    t1, t2 = pairs[:, 0:1], pairs[:, 1:2]
    r = np.clip((t[None, :] - t1) / (t2 - t1), 0.0, 1.0)
    a = 1.0 - r
    saa = (w * a * a).sum(1)
    sar = (w * a * r).sum(1)
    srr = (w * r * r).sum(1)
    sax = (w * a * x).sum(1)
    srx = (w * r * x).sum(1)
    det = saa * srr - sar * sar
    ok = det > 1e-12 * np.maximum(saa * srr, 1e-300)
    det = np.where(ok, det, 1.0)
    x1 = (srr * sax - sar * srx) / det
    x2 = (saa * srx - sar * sax) / det
    # a flat segment (both levels unidentified) falls back to the weighted mean
    mean = (w * x).sum() / w.sum()
    x1 = np.where(ok, x1, mean)
    x2 = np.where(ok, x2, mean)
    fit = x1[:, None] * a + x2[:, None] * r
    ssqw = (w * (x[None, :] - fit) ** 2).sum(1) * wmax
    return x1, x2, ssqw


def knn_sigma(e: NDArray, k: int, floor: float) -> NDArray:
    """Square root of the centred ``k``-point moving average of ``e^2``."""
    n = e.size
    k = max(1, min(int(k), n))
    half_lo = (k - 1) // 2
    half_hi = k - 1 - half_lo
    c = np.concatenate([[0.0], np.cumsum(e * e)])
    i = np.arange(n)
    lo = np.maximum(i - half_lo, 0)
    hi = np.minimum(i + half_hi + 1, n)
    var = (c[hi] - c[lo]) / (hi - lo)
    return np.maximum(np.sqrt(var), floor)


def rampfit(series, t1_range: Optional[Sequence[float]] = None,
            t2_range: Optional[Sequence[float]] = None, knn_k: Optional[int] = None,
            max_iter: int = 50, times=None, chunk: int = 4096) -> RampFitResult:
    """Fit a two-breakpoint ramp by grid search and iterative reweighting.

    Parameters
    ----------
    series : TimeSeries or array
    t1_range, t2_range : (lo, hi) or None
        Breakpoint search ranges; the grid is every observed time stamp in the
        range.  Defaults to the full span.
    knn_k : int, optional
        Neighbours for the variance re-estimate, ``max(5, n // 20)`` by default.
    max_iter : int
    times : array, optional
        Time stamps; ``1..n`` by default.
    """
    x = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    n = x.size
    t = np.arange(1, n + 1, dtype=float) if times is None else np.asarray(times, dtype=float)
    lo1, hi1 = (t[0], t[-1]) if t1_range is None else t1_range
    lo2, hi2 = (t[0], t[-1]) if t2_range is None else t2_range
    g1 = t[(t >= lo1) & (t <= hi1)]
    g2 = t[(t >= lo2) & (t <= hi2)]
    a, b = np.meshgrid(g1, g2, indexing="ij")
    keep = a < b
    pairs = np.column_stack([a[keep], b[keep]])
    if pairs.shape[0] == 0:
        raise ValueError("no breakpoint pair with t1 < t2")
    k = max(5, n // 20) if knn_k is None else int(knn_k)
    sd = float(np.std(x))
    floor = 1e-6 * sd if sd > 0 else 1e-12
    sigma = np.ones(n)
    prev = None
    path = []
    best = None
    converged = False
    for it in range(1, max_iter + 1):
        w = 1.0 / sigma ** 2
        cand = None
        for s in range(0, pairs.shape[0], chunk):
            p = pairs[s:s + chunk]
            x1, x2, ssqw = _grid_search(t, x, w, p)
            j = int(np.argmin(ssqw))
            if cand is None or ssqw[j] < cand[4]:
                cand = (p[j, 0], p[j, 1], x1[j], x2[j], ssqw[j])
        t1, t2, x1, x2, ssqw = cand
        resid = x - ramp(t, t1, t2, x1, x2)
        mse = float(np.mean(resid ** 2))
        path.append(mse)
        best = (t1, t2, x1, x2, ssqw, sigma.copy())
        if prev is not None and abs(mse - prev) <= 1e-8 * mse:
            converged = True
            break
        if mse == 0.0:
            converged = True
            break
        prev = mse
        sigma = knn_sigma(resid, k, floor)
    t1, t2, x1, x2, ssqw, sig = best
    return RampFitResult(float(t1), float(t2), float(x1), float(x2), sig, float(ssqw),
                         len(path), converged, tuple(path))
