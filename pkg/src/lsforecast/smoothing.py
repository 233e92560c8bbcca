"""One-sided Nadaraya-Watson and local-linear trend/scale fits."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .kernels import KernelSpec, Scheme, weight_matrix
from .series import TimeSeries


class FitMode(str, enum.Enum):
    NW_REGULAR = "NW_REGULAR"
    NW_PREDICTIVE = "NW_PREDICTIVE"
    LL_REGULAR = "LL_REGULAR"
    LL_PREDICTIVE = "LL_PREDICTIVE"

    @property
    def scheme(self) -> Scheme:
        return Scheme.NW if self.value.startswith("NW") else Scheme.LL

    @property
    def fitted(self) -> bool:
        return self.value.endswith("REGULAR")

    @classmethod
    def of(cls, smoother: str, fitted: bool) -> "FitMode":
        smoother = "NW" if smoother.upper() in ("LC", "NW") else "LL"
        return cls(f"{smoother}_{'REGULAR' if fitted else 'PREDICTIVE'}")


def sigma_floor(y: NDArray) -> float:
    sd = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
    return 1e-6 * sd if sd > 0 else 1e-6 * max(abs(float(np.mean(y))), 1.0)


@dataclass(frozen=True)
class TrendFit:
    """Trend and scale estimates for ``t = 1..n+1``.

    Arrays are indexed by ``t - 1``.  Only ``t >= start`` (``start = floor(b)+1``)
    lie in the range where the window is complete; earlier entries use the
    truncated head window and are kept for bootstrap reconstruction.
    """

    mode: FitMode
    heteroscedastic: bool
    kernel: KernelSpec
    y: NDArray
    mu: NDArray
    sigma: NDArray
    m2: NDArray

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def start(self) -> int:
        return int(np.floor(self.kernel.bandwidth_b)) + 1

    @property
    def mu_hat(self) -> NDArray:
        return self.mu[self.start - 1:]

    @property
    def sigma_hat(self) -> NDArray:
        return self.sigma[self.start - 1:]

    def residuals_all(self) -> NDArray:
        """Residuals for every ``t = 1..n``."""
        return (self.y - self.mu[:-1]) / self.sigma[:-1]

    @property
    def residuals(self) -> NDArray:
        """Residuals for ``t = start..n``."""
        return self.residuals_all()[self.start - 1:]


def _trend_weights(n: int, kernel: KernelSpec, mode: FitMode) -> NDArray:
    guard = float(n) ** -2 if mode.scheme is Scheme.LL else None
    return weight_matrix(n, kernel, mode.scheme, mode.fitted, guard)


def fit_trend(series, kernel: KernelSpec, mode: FitMode = FitMode.LL_PREDICTIVE,
              heteroscedastic: bool = True) -> TrendFit:
    """Fit ``mu(t)`` and ``sigma(t)`` with a one-sided kernel smoother.

    Parameters
    ----------
    series : TimeSeries or array
    kernel : KernelSpec
    mode : FitMode
        Regular modes use observations up to ``t``; predictive modes up to
        ``t - 1``.
    heteroscedastic : bool
        When false the scale is fixed at one and residuals are ``Y_t - mu(t)``.
    """
    y = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    n = y.size
    mode = FitMode(mode)
    if n <= kernel.bandwidth_b + 2:
        raise ValueError(f"series of length {n} too short for bandwidth {kernel.bandwidth_b}")
    w = _trend_weights(n, kernel, mode)
    mu = w @ y
    m2 = w @ (y * y)
    if heteroscedastic:
        floor = sigma_floor(y)
        sigma = np.sqrt(np.maximum(m2 - mu * mu, floor * floor))
    else:
        sigma = np.ones(n + 1)
    for a in (mu, sigma, m2):
        a.setflags(write=False)
    return TrendFit(mode, heteroscedastic, kernel, y, mu, sigma, m2)


def extrapolate(fit: TrendFit) -> tuple[float, float]:
    """``(mu(n+1), sigma(n+1))``."""
    return float(fit.mu[-1]), float(fit.sigma[-1])
