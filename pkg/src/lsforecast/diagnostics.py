"""Goodness-of-fit diagnostics for the transformed series: KS, Shapiro-Wilk, ACF, QQ."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats
from scipy.special import ndtr, ndtri

from .linear_prediction import sample_autocov

SW_MAX_N = 5000
KS_TERMS = 100


class Reference(str, enum.Enum):
    UNIFORM01 = "UNIFORM01"
    STDNORMAL = "STDNORMAL"


def kolmogorov_sf(lam: float, terms: int = KS_TERMS) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution, series truncated at ``terms``."""
    if lam < 0.2:
        return 1.0
    k = np.arange(1, terms + 1)
    p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam))
    return float(min(max(p, 0.0), 1.0))


def ks_stat_uniform(u) -> float:
    """``sup_i max(i/n - u_(i), u_(i) - (i-1)/n)``."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def ks_statistic(sample, reference: Reference = Reference.STDNORMAL):
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    >>> round(ks_statistic([0.5], Reference.UNIFORM01)[0], 3)
    0.5
    """
    x = np.asarray(sample, dtype=float)
    u = ndtr(x) if Reference(reference) is Reference.STDNORMAL else x
    d = ks_stat_uniform(u)
    return d, kolmogorov_sf(np.sqrt(x.size) * d)


@dataclass(frozen=True)
class SWEntry:
    lam: float
    W: float
    p: float
    flagged: bool = False


def _subsample(x: NDArray) -> NDArray:
    if x.size <= SW_MAX_N:
        return x
    idx = np.linspace(0, x.size - 1, SW_MAX_N).round().astype(int)
    return x[idx]


def shapiro_wilk_combinations(Z, lambda_grid: Optional[Sequence[float]] = None,
                              offset: int = 1) -> list:
    """Shapiro-Wilk test of ``(1-lam) Z_i + lam Z_{i+offset}`` for each ``lam``.

    Joint normality implies normality of every linear combination, so small
    p-values across the grid point away from a Gaussian process.
    """
    z = np.asarray(Z, dtype=float)
    if z.size < 20:
        raise ValueError("need at least 20 observations")
    grid = np.round(np.arange(0, 11) / 10, 10) if lambda_grid is None else lambda_grid
    out = []
    for lam in grid:
        comb = (1 - lam) * z[:-offset] + lam * z[offset:]
        comb = _subsample(comb)
        if np.ptp(comb) == 0:
            out.append(SWEntry(float(lam), float("nan"), float("nan"), True))
            continue
        res = stats.shapiro(comb)
        out.append(SWEntry(float(lam), float(res.statistic), float(res.pvalue)))
    return out


@dataclass(frozen=True)
class ACFResult:
    lags: NDArray
    acf: NDArray
    band: float


def acf(x, max_lag: int) -> ACFResult:
    """Sample autocorrelations with the ``1.96/sqrt(n)`` band."""
    x = np.asarray(x, dtype=float)
    if x.size < max_lag + 5:
        raise ValueError("series too short for the requested lags")
    g = sample_autocov(x, max_lag).gamma
    if g[0] <= 0:
        raise ValueError("zero variance")
    return ACFResult(np.arange(max_lag + 1), g / g[0], 1.96 / np.sqrt(x.size))


def qq_data(sample, reference: Reference = Reference.STDNORMAL):
    """Theoretical quantiles at ``(i - 0.5)/n`` against the sorted sample."""
    s = np.sort(np.asarray(sample, dtype=float))
    p = (np.arange(1, s.size + 1) - 0.5) / s.size
    theo = ndtri(p) if Reference(reference) is Reference.STDNORMAL else p
    return theo, s


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def write_acf_csv(path, res: ACFResult) -> Path:
    return write_csv(path, ["lag", "acf", "band"],
                     ((int(k), float(a), float(res.band)) for k, a in zip(res.lags, res.acf)))


def write_qq_csv(path, theo, samp) -> Path:
    return write_csv(path, ["theoretical_q", "sample_q"],
                     ((float(a), float(b)) for a, b in zip(theo, samp)))


def write_sw_csv(path, entries) -> Path:
    return write_csv(path, ["lambda", "W", "p_value", "flagged"],
                     ((e.lam, e.W, e.p, int(e.flagged)) for e in entries))
