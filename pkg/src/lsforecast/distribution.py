"""One-sided time-varying marginal CDF estimators and their quantile inverses.

Two views are provided.  :func:`estimate_cdf` builds the estimate at a single
time point.  :class:`MarginalField` tabulates the estimates for every
``t = 1..n+1`` of a series at once, which is what the transform and the
bootstrap loops need.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr

from .kernels import KernelSpec, Scheme, weight_matrix, weight_rows
from .series import TimeSeries

GRID_SIZE = 512
PAD = 6.0       # grid padding in units of h0
STEP_EPS = 1e-12


class DistKind(str, enum.Enum):
    LC_STEP = "LC_STEP"
    LC_SMOOTH = "LC_SMOOTH"
    LLH_STEP = "LLH_STEP"
    LLH_SMOOTH = "LLH_SMOOTH"
    LLM = "LLM"

    @property
    def scheme(self) -> Scheme:
        return {"LC": Scheme.NW, "LLH": Scheme.LLH, "LLM": Scheme.LL}[self.value.split("_")[0]]

    @property
    def smooth(self) -> bool:
        return not self.value.endswith("STEP")

    @property
    def gridded(self) -> bool:
        return self is DistKind.LLM


class TMode(str, enum.Enum):
    FITTED = "FITTED"
    PREDICTIVE = "PREDICTIVE"

    @property
    def fitted(self) -> bool:
        return self is TMode.FITTED


def _values(series) -> NDArray:
    return np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)


def _ll_cdf_on_grid(weights: NDArray, y: NDArray, grid: NDArray, h0: float) -> NDArray:
    """Monotone local-linear CDF on a grid.

    The local-linear CDF is differenced cell by cell, negative cell masses are
    clipped to zero and the result is renormalized to total mass one.
    """
    raw = weights @ ndtr((grid[None, :] - y[:, None]) / h0)
    inc = np.maximum(np.diff(raw, axis=-1), 0.0)
    tot = inc.sum(axis=-1, keepdims=True)
    if np.any(tot <= 0):
        raise ValueError("monotone local-linear estimate has zero mass")
    cdf = np.concatenate([np.zeros(raw.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1) / tot
    cdf = np.minimum(cdf, 1.0)
    cdf[..., -1] = 1.0
    return cdf


def _grid_for(y: NDArray, h0: float, size: int) -> NDArray:
    return np.linspace(y.min() - PAD * h0, y.max() + PAD * h0, size)


def _interp_cdf(grid: NDArray, cdf: NDArray, y) -> NDArray:
    return np.interp(y, grid, cdf, left=0.0, right=1.0)


def _interp_quantile(grid: NDArray, cdf: NDArray, beta) -> NDArray:
    """Generalized inverse of a piecewise-linear CDF on a grid."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    j = np.searchsorted(cdf, beta, side="left")
    j = np.clip(j, 0, grid.size - 1)
    lo = np.maximum(j - 1, 0)
    c0, c1 = cdf[lo], cdf[j]
    span = c1 - c0
    frac = np.divide(beta - c0, span, out=np.ones_like(beta), where=span > 0)
    out = grid[lo] + np.clip(frac, 0.0, 1.0) * (grid[j] - grid[lo])
    return np.where(j == 0, grid[0], out)


@dataclass(frozen=True)
class DistributionEstimate:
    """CDF estimate at a single time point.

    ``support`` and ``weights`` hold the in-window observations and their
    normalized weights.  For the LLM kind ``support_grid``/``cdf_grid``
    tabulate the monotone CDF.
    """

    kind: DistKind
    t_eval: Optional[int]
    T_mode: Optional[TMode]
    bandwidth_b: Optional[float]
    h0: Optional[float]
    support: NDArray
    weights: NDArray
    support_grid: Optional[NDArray] = None
    cdf_grid: Optional[NDArray] = None

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind.gridded:
            return _interp_cdf(self.support_grid, self.cdf_grid, y)
        flat = np.atleast_1d(y).ravel()
        if self.kind.smooth:
            m = ndtr((flat[:, None] - self.support[None, :]) / self.h0) @ self.weights
        else:
            m = (self.support[None, :] <= flat[:, None]).astype(float) @ self.weights
        m = np.clip(m, 0.0, 1.0)
        return m.reshape(y.shape) if y.ndim else float(m[0])

    def quantile(self, beta):
        """``inf{y : D(y) >= beta}``."""
        b = np.asarray(beta, dtype=float)
        flat = np.atleast_1d(b).ravel()
        if self.kind.gridded:
            out = _interp_quantile(self.support_grid, self.cdf_grid, flat)
        elif not self.kind.smooth:
            keep = self.weights > 0
            ys, ws = self.support[keep], self.weights[keep]
            order = np.argsort(ys, kind="stable")
            ys, cum = ys[order], np.cumsum(ws[order])
            j = np.searchsorted(cum, flat - STEP_EPS, side="left")
            out = ys[np.minimum(j, ys.size - 1)]
        else:
            out = self._bisect(flat)
        return out.reshape(b.shape) if b.ndim else float(out[0])

    def _bisect(self, beta: NDArray) -> NDArray:
        lo = np.full(beta.shape, self.support.min() - 12 * self.h0)
        hi = np.full(beta.shape, self.support.max() + 12 * self.h0)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            up = self.cdf(mid) >= beta
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        return hi

    def density(self):
        """Cell midpoints and density of the tabulated LLM CDF."""
        if not self.kind.gridded:
            raise ValueError("density is tabulated for the LLM kind only")
        g = self.support_grid
        step = g[1] - g[0]
        return 0.5 * (g[1:] + g[:-1]), np.diff(self.cdf_grid) / step

    @property
    def grid_step(self) -> float:
        if self.support_grid is None:
            return 0.0
        return float(self.support_grid[1] - self.support_grid[0])


def estimate_cdf(series, t: int, kind: DistKind, T_mode: TMode, kernel: KernelSpec,
                 h0: Optional[float] = None, times=None,
                 grid_size: int = GRID_SIZE) -> DistributionEstimate:
    """Estimate ``D_t`` from observations with time stamps up to ``T``.

    Parameters
    ----------
    series : TimeSeries or array
    t : int
        Evaluation time, at most ``n + 1``.
    kind : DistKind
    T_mode : TMode
        ``FITTED`` uses ``T = t`` and ``PREDICTIVE`` uses ``T = t - 1``.
    kernel : KernelSpec
    h0 : float
        Secondary bandwidth for smooth kinds, in data units.
    times : array, optional
        Design points of the observations (default ``1..n``).  Passing a
        subset lets observations be dropped while indices are preserved.
    """
    y = _values(series)
    kind, T_mode = DistKind(kind), TMode(T_mode)
    times = np.arange(1, y.size + 1, dtype=float) if times is None else np.asarray(times, dtype=float)
    if kind.smooth and not (h0 and h0 > 0):
        raise ValueError("smooth kinds need h0 > 0")
    w = weight_rows(times, np.array([float(t)]), kernel, kind.scheme, T_mode.fitted)[0]
    keep = w != 0
    sup, wt = y[keep], w[keep]
    grid = cdf = None
    if kind.gridded:
        grid = _grid_for(sup, h0, grid_size)
        cdf = _ll_cdf_on_grid(wt, sup, grid, h0)
    return DistributionEstimate(kind, int(t), T_mode, float(kernel.bandwidth_b),
                                h0, sup, wt, grid, cdf)


def quantile_inverse(est: DistributionEstimate, beta):
    return est.quantile(beta)


def global_empirical(series, smooth: bool = False, h0: Optional[float] = None) -> DistributionEstimate:
    """Equal-weight empirical CDF (optionally Gaussian-smoothed) of all points."""
    y = _values(series)
    if y.size < 2:
        raise ValueError("need at least two observations")
    kind = DistKind.LC_SMOOTH if smooth else DistKind.LC_STEP
    if smooth and not (h0 and h0 > 0):
        raise ValueError("smoothing needs h0 > 0")
    return DistributionEstimate(kind, None, None, None, h0 if smooth else None,
                                y.copy(), np.full(y.size, 1.0 / y.size))


def local_scale(y, b: float) -> float:
    """Typical within-window standard deviation of a series.

    The median over ``t`` of the one-sided local-constant variance.  Used to
    put the secondary bandwidth ``h0`` on the data scale.
    """
    y = np.asarray(y, dtype=float)
    w = weight_matrix(y.size, KernelSpec(bandwidth_b=max(float(b), 2.0)), Scheme.NW, True)[:-1]
    mu = w @ y
    var = np.maximum(w @ (y * y) - mu * mu, 0.0)
    s = float(np.sqrt(np.median(var[int(b):] if y.size > b + 3 else var)))
    if s <= 0:
        s = float(np.std(y)) or 1.0
    return s


class MarginalField:
    """Tabulated estimates ``D_t`` for ``t = 1..n+1`` of one series.

    Step kinds are exact.  Smooth kinds are tabulated on a common grid and
    evaluated/inverted by linear interpolation, so evaluation and inversion
    are mutually consistent.

    Parameters
    ----------
    y : array (n,)
    kind : DistKind
    T_mode : TMode
    kernel : KernelSpec
    h0 : float, optional
        Required for smooth kinds.
    grid_size : int
    """

    def __init__(self, y, kind: DistKind, T_mode: TMode, kernel: KernelSpec,
                 h0: Optional[float] = None, grid_size: int = GRID_SIZE):
        self.y = np.asarray(y, dtype=float)
        self.n = self.y.size
        self.kind = DistKind(kind)
        self.T_mode = TMode(T_mode)
        self.kernel = kernel
        self.h0 = h0
        self.weights = weight_matrix(self.n, kernel, self.kind.scheme, self.T_mode.fitted)
        if self.kind.smooth:
            if not (h0 and h0 > 0):
                raise ValueError("smooth kinds need h0 > 0")
            self.grid = _grid_for(self.y, h0, grid_size)
            if self.kind.gridded:
                self.cdf = _ll_cdf_on_grid(self.weights, self.y, self.grid, h0)
            else:
                self.cdf = np.clip(self.weights @ ndtr((self.grid[None, :] - self.y[:, None]) / h0), 0.0, 1.0)
                self.cdf = np.maximum.accumulate(self.cdf, axis=1)
            self._g0 = self.grid[0]
            self._step = self.grid[1] - self.grid[0]
        else:
            self.order = np.argsort(self.y, kind="stable")
            self.ys = self.y[self.order]
            self.ws = self.weights[:, self.order]
            self.cum = np.cumsum(self.ws, axis=1)

    @property
    def grid_step(self) -> float:
        return float(self._step) if self.kind.smooth else 0.0

    def cdf_rows(self, t, yv) -> NDArray:
        """``D_t(y_t)`` for paired arrays of times (1-based) and values."""
        r = np.asarray(t, dtype=int) - 1
        yv = np.asarray(yv, dtype=float)
        if self.kind.smooth:
            pos = (yv - self._g0) / self._step
            j = np.clip(np.floor(pos).astype(int), 0, self.grid.size - 2)
            frac = np.clip(pos - j, 0.0, 1.0)
            out = self.cdf[r, j] * (1 - frac) + self.cdf[r, j + 1] * frac
            out = np.where(pos < 0, 0.0, np.where(pos > self.grid.size - 1, 1.0, out))
            return out
        k = np.searchsorted(self.ys, yv, side="right")
        out = np.where(k > 0, self.cum[r, np.maximum(k - 1, 0)], 0.0)
        return np.clip(out, 0.0, 1.0)

    def diag(self) -> NDArray:
        """``D_t(Y_t)`` for ``t = 1..n``."""
        return self.cdf_rows(np.arange(1, self.n + 1), self.y)

    def quantile_rows(self, t, beta) -> NDArray:
        """``D_t^{-1}(beta_t)`` for paired arrays of times and levels."""
        r = np.asarray(t, dtype=int) - 1
        beta = np.asarray(beta, dtype=float)
        if self.kind.smooth:
            c = self.cdf[r]
            j = np.count_nonzero(c < beta[:, None], axis=1)
            j = np.clip(j, 0, self.grid.size - 1)
            lo = np.maximum(j - 1, 0)
            idx = np.arange(r.size)
            c0, c1 = c[idx, lo], c[idx, j]
            span = c1 - c0
            frac = np.divide(beta - c0, span, out=np.ones_like(beta), where=span > 0)
            out = self.grid[lo] + np.clip(frac, 0, 1) * self._step
            return np.where(j == 0, self.grid[0], out)
        ws, cum = self.ws[r], self.cum[r]
        ok = (ws > 0) & (cum >= beta[:, None] - STEP_EPS)
        j = np.where(ok.any(axis=1), np.argmax(ok, axis=1),
                     ws.shape[1] - 1 - np.argmax((ws > 0)[:, ::-1], axis=1))
        return self.ys[j]

    def quantile_row(self, t: int, beta) -> NDArray:
        """Many levels on the single row ``t``."""
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        r = int(t) - 1
        if self.kind.smooth:
            return _interp_quantile(self.grid, self.cdf[r], beta)
        keep = self.ws[r] > 0
        ys, cum = self.ys[keep], self.cum[r][keep]
        j = np.searchsorted(cum, beta - STEP_EPS, side="left")
        return ys[np.minimum(j, ys.size - 1)]

    def estimate(self, t: int) -> DistributionEstimate:
        """Single-row view of the field at time ``t``.

        Smooth non-LLM kinds come back in their exact (untabulated) form.
        """
        w = self.weights[t - 1]
        keep = w != 0
        grid = cdf = None
        if self.kind.gridded:
            grid, cdf = self.grid, self.cdf[t - 1]
        return DistributionEstimate(self.kind, int(t), self.T_mode, float(self.kernel.bandwidth_b),
                                    self.h0, self.y[keep], w[keep], grid, cdf)


def initial_h0(y, b: float) -> float:
    """Normal-reference secondary bandwidth ``1.06 s w^{-1/5}`` for window size ``w = b``."""
    return 1.06 * local_scale(y, b) * float(b) ** -0.2


def final_h0(y, b: float) -> float:
    """Secondary bandwidth ``(b/n)^2`` on the data scale."""
    y = np.asarray(y, dtype=float)
    return (float(b) / y.size) ** 2 * local_scale(y, b)
