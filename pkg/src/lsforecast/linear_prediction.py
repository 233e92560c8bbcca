"""Sample autocovariance, Yule-Walker AR fitting and AR linear prediction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class AutocovSeq:
    gamma: NDArray
    n_source: int

    @property
    def max_lag(self) -> int:
        return self.gamma.size - 1


def sample_autocov(x, max_lag: int, center: bool = True) -> AutocovSeq:
    """Autocovariances with divisor ``n``; lags ``>= n`` are zero.

    >>> sample_autocov([1, -1, 1, -1], 1, center=False).gamma.tolist()
    [1.0, -0.75]
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    if center:
        x = x - x.mean()
    g = np.zeros(max_lag + 1)
    top = min(max_lag, n - 1)
    if top > 32:
        # FFT route for long lag ranges
        m = 1 << int(np.ceil(np.log2(2 * n)))
        f = np.fft.rfft(x, m)
        acv = np.fft.irfft(f * np.conj(f), m)[:top + 1]
        g[:top + 1] = acv / n
    else:
        for k in range(top + 1):
            g[k] = x[:n - k] @ x[k:] / n
    return AutocovSeq(g, n)


def levinson_durbin(gamma, p_max: int):
    """Solve the Yule-Walker equations for orders ``0..p_max``.

    Returns
    -------
    phis : list of ndarray
        ``phis[p]`` holds the order-``p`` coefficients.
    sigma2 : ndarray
        Innovation variance per order, nonincreasing.
    """
    g = np.asarray(gamma, dtype=float)
    if g[0] <= 0:
        raise ValueError("autocovariance at lag 0 must be positive")
    phis = [np.zeros(0)]
    sigma2 = np.empty(p_max + 1)
    sigma2[0] = g[0]
    phi = np.zeros(0)
    for p in range(1, p_max + 1):
        acc = g[p] - phi @ g[1:p][::-1] if p > 1 else g[1]
        k = acc / sigma2[p - 1]
        phi = np.concatenate([phi - k * phi[::-1], [k]])
        sigma2[p] = sigma2[p - 1] * (1.0 - k * k)
        if sigma2[p] <= 0:
            sigma2[p:] = sigma2[p - 1] * 1e-300
            phis.extend([phi] * (p_max + 1 - p))
            break
        phis.append(phi)
    return phis, sigma2


def default_p_max(m: int) -> int:
    return int(max(0, min(np.floor(10 * np.log10(max(m, 1))), m // 4)))


@dataclass(frozen=True)
class ARFit:
    order_p: int
    phi: NDArray
    tau2: float
    residuals_V: NDArray
    aic: float
    gamma: Optional[AutocovSeq] = None
    offset: int = 0

    def predict(self, recent) -> float:
        return ar_predict(self, recent)


def fit_ar_yw(x, p_max: Optional[int] = None, order: Optional[int] = None,
              offset: int = 0) -> ARFit:
    """Yule-Walker AR fit with AIC order selection.

    Parameters
    ----------
    x : array
        Series to fit, chronological.  Mean-centered before the
        autocovariance; residuals use the raw values.
    p_max : int, optional
        Largest order considered; ``min(10 log10 m, m/4)`` by default.
    order : int, optional
        Fix the order instead of selecting it.
    offset : int
        Index of ``x[0]`` in the parent series minus one (for bookkeeping of
        the residual indices only).
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    if p_max is None:
        p_max = default_p_max(m)
    if order is not None:
        p_max = max(int(order), 0)
    if m <= p_max + 10 and order is None:
        raise ValueError(f"series of length {m} too short for p_max={p_max}")
    acv = sample_autocov(x, p_max)
    if acv.gamma[0] <= 1e-14 * max(1.0, float(np.mean(x * x))):
        raise ValueError("degenerate (constant) input: autocovariance not positive definite")
    phis, s2 = levinson_durbin(acv.gamma, p_max)
    aic = m * np.log(np.maximum(s2, 1e-300)) + 2 * np.arange(p_max + 1)
    p = int(order) if order is not None else int(np.argmin(aic))
    phi = phis[p]
    resid = x[p:].copy()
    for i in range(1, p + 1):
        resid -= phi[i - 1] * x[p - i:m - i]
    return ARFit(p, phi, float(s2[p]), resid, float(aic[p]), acv, offset)


def ar_predict(fit: ARFit, recent) -> float:
    """One-step AR prediction from the last values, given chronologically.

    ``recent[-1]`` is the most recent value.

    >>> ar_predict(ARFit(1, np.array([0.5]), 1.0, np.zeros(0), 0.0), [2.0])
    1.0
    """
    p = fit.order_p
    if p == 0:
        return 0.0
    recent = np.asarray(recent, dtype=float)
    if recent.size < p:
        raise ValueError(f"need {p} recent values")
    return float(fit.phi @ recent[-p:][::-1])


def ar_autocov_extend(phi, gamma_head, K: int) -> NDArray:
    """Extend autocovariances to lag ``K`` by the AR difference equation.

    Parameters
    ----------
    phi : array or ARFit
    gamma_head : array or AutocovSeq
        Must cover lags ``0..p``.
    """
    if isinstance(phi, ARFit):
        phi = phi.phi
    phi = np.asarray(phi, dtype=float)
    head = gamma_head.gamma if isinstance(gamma_head, AutocovSeq) else np.asarray(gamma_head, dtype=float)
    p = phi.size
    if K < p:
        raise ValueError("K must be at least p")
    g = np.zeros(K + 1)
    g[:p + 1] = head[:p + 1]
    for k in range(p + 1, K + 1):
        g[k] = phi @ g[k - p:k][::-1]
    return g
