"""One-sided kernel weights shared by trend fitting and distribution estimation.

Every estimator here evaluated at time ``t`` is a linear combination of the
observations with time stamps ``t_i <= T`` inside the window ``|t - t_i| <= b``,
where ``T = t`` (fitted / regular) or ``T = t - 1`` (predictive / delete-1).
The weights depend only on the design, so they are tabulated once per
``(n, b, kernel, scheme, mode)`` and reused.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.typing import NDArray

MIN_POINTS = 3


class KernelFamily(str, enum.Enum):
    EPANECHNIKOV = "EPANECHNIKOV"
    TRIANGULAR = "TRIANGULAR"
    UNIFORM = "UNIFORM"


class Scheme(str, enum.Enum):
    """How kernel values are turned into linear weights."""
    NW = "NW"      # local constant
    LL = "LL"      # local linear (may be negative)
    LLH = "LLH"    # local linear with Hansen truncation (nonnegative)


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.EPANECHNIKOV
    bandwidth_b: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not self.bandwidth_b >= 2:
            raise ValueError("bandwidth_b must be at least 2")


def kernel_values(family: KernelFamily, u: NDArray) -> NDArray:
    """Kernel on [-1, 1], zero outside."""
    u = np.abs(np.asarray(u, dtype=float))
    family = KernelFamily(family)
    if family is KernelFamily.EPANECHNIKOV:
        k = 0.75 * (1.0 - u * u)
    elif family is KernelFamily.TRIANGULAR:
        k = 1.0 - u
    else:
        k = np.full_like(u, 0.5)
    return np.where(u <= 1.0, k, 0.0)


def _limits(times: NDArray, evals: NDArray, fitted: bool) -> NDArray:
    """Upper time limit T for each evaluation point, with the head rule."""
    lim = evals if fitted else evals - 1
    # head rule: the first MIN_POINTS design points are always available
    floor = times[min(MIN_POINTS, times.size) - 1]
    return np.maximum(lim, floor)


def weight_rows(times: NDArray, evals: NDArray, spec: KernelSpec, scheme: Scheme,
                fitted: bool, guard: Optional[float] = None) -> NDArray:
    """Normalized one-sided weights, one row per evaluation point.

    Parameters
    ----------
    times : array (m,)
        Increasing design points ``t_i`` of the available observations.
    evals : array (r,)
        Evaluation points ``t``.
    spec : KernelSpec
    scheme : Scheme
    fitted : bool
        ``True`` for ``T = t`` and ``False`` for ``T = t - 1``.
    guard : float, optional
        Denominator guard for the LL scheme; used only when the LL normalizer
        falls below it.

    Returns
    -------
    ndarray (r, m)
        Rows sum to one.  NW and LLH rows are nonnegative.
    """
    times = np.asarray(times, dtype=float)
    evals = np.asarray(evals, dtype=float)
    b = float(spec.bandwidth_b)
    lim = _limits(times, evals, fitted)
    d = evals[:, None] - times[None, :]
    inside = (times[None, :] <= lim[:, None]) & (np.abs(d) <= b)
    k = kernel_values(spec.family, d / b) * inside
    ksum = k.sum(axis=1)
    if np.any(ksum <= 0):
        bad = int(np.flatnonzero(ksum <= 0)[0])
        raise ValueError(f"no kernel mass at t={evals[bad]:g}")
    nw = k / ksum[:, None]
    scheme = Scheme(scheme)
    if scheme is Scheme.NW:
        return nw

    npts = np.count_nonzero(k > 0, axis=1)
    if scheme is Scheme.LL:
        s1 = (k * d).sum(axis=1)
        s2 = (k * d * d).sum(axis=1)
        w = k * (s2[:, None] - d * s1[:, None])
        den = w.sum(axis=1)
        if guard is not None:
            den = np.where(den > guard, den, den + guard)
        ok = (npts >= MIN_POINTS) & (den > 0)
        out = np.where(ok[:, None], w / np.where(ok, den, 1.0)[:, None], nw)
        return out

    wi = k / b
    s1 = (wi * d).sum(axis=1)
    s2 = (wi * d * d).sum(axis=1)
    beta = np.divide(s1, s2, out=np.zeros_like(s1), where=s2 > 0)
    bd = beta[:, None] * d
    wd = np.where(bd > 1.0, 0.0, wi * (1.0 - bd)) * inside
    den = wd.sum(axis=1)
    ok = den > 0
    return np.where(ok[:, None], wd / np.where(ok, den, 1.0)[:, None], nw)


@lru_cache(maxsize=64)
def _cached(n: int, b: float, family: str, scheme: str, fitted: bool,
            guard: Optional[float]) -> NDArray:
    times = np.arange(1, n + 1, dtype=float)
    evals = np.arange(1, n + 2, dtype=float)
    w = weight_rows(times, evals, KernelSpec(KernelFamily(family), b),
                    Scheme(scheme), fitted, guard)
    w.setflags(write=False)
    return w


def weight_matrix(n: int, spec: KernelSpec, scheme: Scheme, fitted: bool,
                  guard: Optional[float] = None) -> NDArray:
    """Weights for an evenly spaced series ``t_i = 1..n`` at ``t = 1..n+1``.

    Row ``t-1`` holds the weights for time ``t``.  The returned array is
    shared and read-only.
    """
    return _cached(int(n), float(spec.bandwidth_b), KernelFamily(spec.family).value,
                   Scheme(scheme).value, bool(fitted), guard)
