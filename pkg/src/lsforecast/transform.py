"""The invertible model-free map: uniformize, Gaussianize, whiten.

``forward`` sends a series ``Y_1..Y_n`` to approximately i.i.d. N(0,1)
innovations ``eps`` and records everything needed to go back, including the
dimension ``n+1`` covariance whose last Cholesky row drives the predictive
equation ``g(x) = D_{n+1}^{-1}(Phi(sum_i c_i eps_i + c_{n+1} x))``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr, ndtri

from .covariance import ToeplitzCovariance, pd_correct, tapered_covariance, whiten_solve
from .distribution import DistKind, MarginalField, TMode, final_h0
from .kernels import KernelSpec
from .linear_prediction import ARFit, ar_autocov_extend, fit_ar_yw
from .series import TimeSeries


class CovKind(str, enum.Enum):
    AR_IMPLIED = "AR_IMPLIED"
    FLAT_TOP = "FLAT_TOP"


@dataclass(frozen=True)
class TransformConfig:
    """Settings of the model-free transform.

    ``h0=None`` applies the default ``(b/n)^2`` rule on the data scale.
    """

    kernel: KernelSpec
    dist_kind: DistKind = DistKind.LLM
    T_mode: TMode = TMode.PREDICTIVE
    cov_kind: CovKind = CovKind.FLAT_TOP
    h0: Optional[float] = None
    grid_size: int = 512
    band_l: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "dist_kind", DistKind(self.dist_kind))
        object.__setattr__(self, "T_mode", TMode(self.T_mode))
        object.__setattr__(self, "cov_kind", CovKind(self.cov_kind))

    @property
    def b(self) -> float:
        return float(self.kernel.bandwidth_b)

    def with_bandwidth(self, b: float, h0: Optional[float] = None) -> "TransformConfig":
        return replace(self, kernel=KernelSpec(self.kernel.family, float(b)), h0=h0)

    def resolve_h0(self, y) -> Optional[float]:
        if not self.dist_kind.smooth:
            return None
        return self.h0 if self.h0 is not None else final_h0(y, self.b)


def clamp_u(u, n: int) -> NDArray:
    lo = 1.0 / (4 * n)
    return np.clip(u, lo, 1.0 - lo)


def build_field(y, config: TransformConfig) -> MarginalField:
    y = np.asarray(y, dtype=float)
    return MarginalField(y, config.dist_kind, config.T_mode, config.kernel,
                         config.resolve_h0(y), config.grid_size)


def estimate_covariance(z: NDArray, cov_kind: CovKind, band_l: Optional[float] = None):
    """Covariance of dimension ``len(z) + 1`` for the Gaussianized series."""
    n = z.size
    if cov_kind is CovKind.FLAT_TOP:
        return tapered_covariance(z, n + 1, band_l), None
    fit = fit_ar_yw(z)
    g = ar_autocov_extend(fit, fit.gamma, n)
    return pd_correct(g, n + 1), fit


@dataclass(frozen=True)
class MFState:
    """Output of :func:`forward`; immutable."""

    y: NDArray
    config: TransformConfig
    field: MarginalField
    U: NDArray
    Z: NDArray
    epsilon: NDArray
    cov_ext: ToeplitzCovariance
    ar_fit: Optional[ARFit]
    shift: float
    c_last: float

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def cov(self) -> ToeplitzCovariance:
        return self.cov_ext.leading(self.n)

    @property
    def c_row(self) -> NDArray:
        return np.array(self.cov_ext.chol[-1])

    def g(self, x) -> NDArray:
        """Predictive equation evaluated at innovations ``x``."""
        return g_apply(self.field, self.shift, self.c_last, x)

    def inverse(self, eps) -> NDArray:
        """``Y_1..Y_n`` from innovations: color, then Phi, then per-t quantiles."""
        z = self.cov_ext.chol[:self.n, :self.n] @ np.asarray(eps, dtype=float)
        return self.field.quantile_rows(np.arange(1, self.n + 1), ndtr(z))

    def inverse_ext(self, eps) -> NDArray:
        """``Y_1..Y_{n+1}`` from ``n+1`` innovations."""
        z = self.cov_ext.chol @ np.asarray(eps, dtype=float)
        return self.field.quantile_rows(np.arange(1, self.n + 2), ndtr(z))

    def inverse_next(self, eps_future, eps_vector=None):
        """``Y_{n+1}`` from a future innovation (and optionally other past ones)."""
        shift = self.shift
        if eps_vector is not None:
            shift = float(self.c_row[:-1] @ np.asarray(eps_vector, dtype=float))
        out = g_apply(self.field, shift, self.c_last, eps_future)
        return float(out[0]) if np.ndim(eps_future) == 0 else out


def g_apply(field: MarginalField, shift: float, c_last: float, x) -> NDArray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return field.quantile_row(field.n + 1, ndtr(shift + c_last * x))


def g_function(state: MFState):
    return state.g


def _uniformize(field: MarginalField, y: NDArray, rng: Optional[np.random.Generator]) -> NDArray:
    t = np.arange(1, y.size + 1)
    if rng is None:
        return field.cdf_rows(t, y)
    hi = field.cdf_rows(t, y)
    lo = field.cdf_rows(t, np.nextafter(y, -np.inf))
    return lo + rng.random(y.size) * (hi - lo)


def forward(series, config: TransformConfig, pit_rng: Optional[np.random.Generator] = None,
            field: Optional[MarginalField] = None) -> MFState:
    """Transform a series into innovations.

    Parameters
    ----------
    series : TimeSeries or array
    config : TransformConfig
    pit_rng : Generator, optional
        When given, ties in the probability integral transform are broken by
        uniform jittering (randomized PIT), which is the right choice for
        discrete-valued data.
    field : MarginalField, optional
        Reuse an existing marginal estimate built with the same settings.
    """
    y = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    n = y.size
    if n <= config.b + 5:
        raise ValueError(f"series of length {n} too short for bandwidth {config.b}")
    if field is None:
        field = build_field(y, config)
    u = clamp_u(_uniformize(field, y, pit_rng), n)
    z = ndtri(u)
    cov_ext, fit = estimate_covariance(z, config.cov_kind, config.band_l)
    chol = cov_ext.chol
    eps = whiten_solve(cov_ext.leading(n), z)
    shift = float(chol[-1, :-1] @ eps)
    for a in (u, z, eps):
        a.setflags(write=False)
    return MFState(y, config, field, u, z, eps, cov_ext, fit, shift, float(chol[-1, -1]))


def shift_for(state: MFState, y_other, pit_rng: Optional[np.random.Generator] = None) -> float:
    """Linear predictor of ``Z_{n+1}`` when the fitted map is applied to another series.

    Used by the bootstrap: a re-estimated transform is conditioned on the
    original observations.
    """
    y_other = np.asarray(y_other, dtype=float)
    n = state.n
    u = clamp_u(_uniformize(state.field, y_other, pit_rng), n)
    eps = whiten_solve(state.cov_ext.leading(n), ndtri(u))
    return float(state.cov_ext.chol[-1, :-1] @ eps)
