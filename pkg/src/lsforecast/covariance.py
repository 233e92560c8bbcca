"""Tapered, banded, positive-definite Toeplitz covariance estimation."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from .linear_prediction import ARFit, AutocovSeq, ar_autocov_extend, sample_autocov

SHRINK_GRID = np.round(np.arange(0.0, 1.0001, 0.05), 10)
BAND_RUN = 5


class PDError(np.linalg.LinAlgError):
    """Raised when a covariance cannot be made positive definite."""


def flat_top_kappa(x) -> NDArray:
    """Trapezoidal flat-top window: 1 on [0,1], linear down to 0 at 2."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.clip(2.0 - x, 0.0, 1.0)


def select_band(gamma, n: Optional[int] = None) -> int:
    """Smallest ``k`` after which ``BAND_RUN`` autocorrelations are insignificant.

    The threshold is ``1.96 sqrt(log10(n)/n)``.
    """
    g = gamma.gamma if isinstance(gamma, AutocovSeq) else np.asarray(gamma, dtype=float)
    if n is None:
        n = gamma.n_source if isinstance(gamma, AutocovSeq) else g.size
    rho = np.abs(g / g[0])
    thr = 1.96 * np.sqrt(np.log10(max(n, 2)) / n)
    small = rho < thr
    last = g.size - 1
    for k in range(last + 1):
        run = small[k + 1:k + 1 + BAND_RUN]
        if run.size == 0 or np.all(run):
            return k
    return last


def flat_top_taper(gamma, band_l: float) -> NDArray:
    """Multiply lag ``s`` by ``kappa(s / l)``.  ``band_l = 0`` keeps lag 0 only."""
    g = gamma.gamma if isinstance(gamma, AutocovSeq) else np.asarray(gamma, dtype=float)
    s = np.arange(g.size)
    if band_l <= 0:
        w = (s == 0).astype(float)
    else:
        w = flat_top_kappa(s / band_l)
    return g * w


def toeplitz_first_row(gamma: NDArray, dim: int) -> NDArray:
    row = np.zeros(dim)
    m = min(dim, gamma.size)
    row[:m] = gamma[:m]
    return row


@dataclass(frozen=True)
class ToeplitzCovariance:
    """Symmetric Toeplitz covariance given by its first row."""

    gamma_star: NDArray
    band_l: float = float("nan")
    pd_shrink: float = 0.0
    _chol: Optional[NDArray] = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.gamma_star.size

    def matrix(self) -> NDArray:
        return linalg.toeplitz(self.gamma_star)

    @cached_property
    def chol(self) -> NDArray:
        """Lower-triangular Cholesky factor."""
        if self._chol is not None:
            return self._chol
        try:
            c = np.linalg.cholesky(self.matrix())
        except np.linalg.LinAlgError as exc:
            raise PDError(str(exc)) from exc
        c.setflags(write=False)
        return c

    def leading(self, m: int) -> "ToeplitzCovariance":
        """Leading ``m x m`` block; its factor is the leading block of ours."""
        chol = np.ascontiguousarray(self.chol[:m, :m])
        chol.setflags(write=False)
        return ToeplitzCovariance(self.gamma_star[:m].copy(), self.band_l, self.pd_shrink, chol)


def _try_chol(row: NDArray, tol: float) -> Optional[NDArray]:
    try:
        c = np.linalg.cholesky(linalg.toeplitz(row))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(c)) or np.min(np.diag(c)) < tol:
        return None
    return c


def pd_correct(gamma_tapered, dim: int, band_l: float = float("nan")) -> ToeplitzCovariance:
    """Shrink toward ``gamma_0 I`` on the grid 0, 0.05, ..., 1 until PD.

    The smallest shrink for which the Cholesky factor exists with diagonal at
    least ``1e-10 gamma_0`` is used.
    """
    g = gamma_tapered.gamma if isinstance(gamma_tapered, AutocovSeq) else np.asarray(gamma_tapered, dtype=float)
    if not g[0] > 0:
        raise PDError("gamma_0 must be positive")
    row = toeplitz_first_row(g, dim)
    tol = 1e-10 * g[0]
    for s in SHRINK_GRID:
        cand = row * (1.0 - s)
        cand[0] = row[0]
        c = _try_chol(cand, tol)
        if c is not None:
            c.setflags(write=False)
            return ToeplitzCovariance(cand, band_l, float(s), c)
    raise PDError("shrinkage failed to produce a positive definite matrix")


def tapered_covariance(z, dim: int, band_l: Optional[float] = None) -> ToeplitzCovariance:
    """Flat-top estimate from data ``z`` as a PD Toeplitz matrix of size ``dim``.

    Lags beyond ``len(z) - 1`` are zero, so with ``dim = len(z) + 1`` this is
    the extension that sets the corner lag to zero.
    """
    z = np.asarray(z, dtype=float)
    acv = sample_autocov(z, z.size - 1)
    if band_l is None:
        band_l = float(select_band(acv, z.size))
    tapered = flat_top_taper(acv, band_l)
    return pd_correct(tapered, dim, band_l)


def ar_covariance(fit: ARFit, dim: int) -> ToeplitzCovariance:
    """AR-implied Toeplitz covariance of size ``dim``."""
    if fit.gamma is None:
        raise ValueError("AR fit lacks its autocovariance head")
    g = ar_autocov_extend(fit, fit.gamma, max(dim - 1, fit.order_p))
    return pd_correct(g, dim)


def extend_to_np1(cov: ToeplitzCovariance, ar_fit: Optional[ARFit] = None) -> ToeplitzCovariance:
    """Dimension ``n+1`` extension.

    Without an AR fit the new corner lag is zero.  With one, it comes from the
    AR difference equation.
    """
    n = cov.dim
    row = np.zeros(n + 1)
    row[:n] = cov.gamma_star
    if ar_fit is not None:
        p = ar_fit.order_p
        row[n] = ar_fit.phi @ row[n - p:n][::-1] if p > 0 else 0.0
    c = _try_chol(row, 1e-10 * row[0])
    if c is not None:
        c.setflags(write=False)
        return ToeplitzCovariance(row, cov.band_l, cov.pd_shrink, c)
    out = pd_correct(row, n + 1, cov.band_l)
    return ToeplitzCovariance(out.gamma_star, cov.band_l,
                              1.0 - (1.0 - cov.pd_shrink) * (1.0 - out.pd_shrink), out.chol)


def cholesky_last_row(cov: ToeplitzCovariance) -> NDArray:
    return np.array(cov.chol[-1])


def whiten_solve(cov: ToeplitzCovariance, z) -> NDArray:
    """Solve ``C eps = z`` by forward substitution."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] != cov.dim:
        raise ValueError("length mismatch")
    return linalg.solve_triangular(cov.chol, z, lower=True, check_finite=False)


def color(cov: ToeplitzCovariance, eps) -> NDArray:
    """Inverse of :func:`whiten_solve`: ``C eps``."""
    return cov.chol @ np.asarray(eps, dtype=float)
