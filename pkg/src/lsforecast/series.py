"""Core data types, synthetic generators, CSV ingestion and scoring."""
from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

BURN_IN = 500


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent generator keyed by ``(seed, *keys)``.

    Streams depend only on the key tuple, never on call order, so work can be
    split across threads without changing results.
    """
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                 spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class TimeSeries:
    """Ordered real observations with optional age stamps."""

    values: NDArray[np.float64]
    ages: Optional[NDArray[np.float64]] = None
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 1:
            raise ValueError("a series needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ValueError("series values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.ages is not None:
            a = np.asarray(self.ages, dtype=float).ravel()
            if a.shape != v.shape:
                raise ValueError("ages and values differ in length")
            d = np.diff(a)
            if a.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("ages must be strictly monotone")
            a.setflags(write=False)
            object.__setattr__(self, "ages", a)

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    def head(self, m: int) -> "TimeSeries":
        """First ``m`` observations."""
        ages = None if self.ages is None else self.ages[:m]
        return TimeSeries(self.values[:m], ages, self.label)

    def tail(self, m: int) -> "TimeSeries":
        ages = None if self.ages is None else self.ages[-m:]
        return TimeSeries(self.values[-m:], ages, self.label)

    def to_csv(self) -> str:
        """Serialize with full double precision (``repr`` round-trips)."""
        buf = io.StringIO()
        if self.ages is None:
            buf.write("value\n")
            for v in self.values:
                buf.write(f"{float(v)!r}\n")
        else:
            buf.write("age,value\n")
            for a, v in zip(self.ages, self.values):
                buf.write(f"{float(a)!r},{float(v)!r}\n")
        return buf.getvalue()


class GeneratorKind(str, enum.Enum):
    AR5_SINE = "AR5_SINE"
    TAR1_SINE = "TAR1_SINE"


AR5_DEFAULTS = {"amplitude": 1.0, "tau": 0.14,
                "phi": (0.5, 0.1, 0.1, 0.1, 0.1)}
TAR1_DEFAULTS = {"amplitude": 5.0, "tau": 0.4, "alpha": 0.5, "beta": -0.6,
                 "r": 0.6, "gamma": 1.0, "w0": 0.0}


def is_causal(phi: Sequence[float]) -> bool:
    """True when the AR polynomial has all companion eigenvalues inside the unit circle."""
    phi = np.asarray(phi, dtype=float)
    p = phi.size
    if p == 0:
        return True
    comp = np.zeros((p, p))
    comp[0] = phi
    if p > 1:
        comp[1:, :-1] = np.eye(p - 1)
    return bool(np.max(np.abs(np.linalg.eigvals(comp))) < 1.0)


@dataclass(frozen=True)
class GeneratorSpec:
    """Simulation design: kind, length, seed and parameter overrides.

    ``parameters`` may override any of ``amplitude``, ``tau``, ``phi`` (AR5) or
    ``alpha``, ``beta``, ``r``, ``gamma``, ``w0`` (TAR1).
    """

    kind: GeneratorKind
    n: int
    seed: int
    parameters: Mapping[str, object] = field(default_factory=dict)
    realization: int = 0

    def resolved(self) -> dict:
        base = AR5_DEFAULTS if GeneratorKind(self.kind) is GeneratorKind.AR5_SINE else TAR1_DEFAULTS
        out = dict(base)
        unknown = set(self.parameters) - set(base)
        if unknown:
            raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
        out.update(self.parameters)
        return out

    def validate(self) -> None:
        if self.n < 50:
            raise ValueError("n must be at least 50")
        par = self.resolved()
        if float(par["tau"]) < 0:
            raise ValueError("tau must be nonnegative")
        if GeneratorKind(self.kind) is GeneratorKind.AR5_SINE and not is_causal(par["phi"]):
            raise ValueError("AR coefficients are not causal")


def _ar_noise(phi: NDArray, tau: float, n: int, rng: np.random.Generator) -> NDArray:
    p = phi.size
    e = rng.standard_normal(BURN_IN + n) * tau
    w = np.zeros(BURN_IN + n + p)
    for t in range(BURN_IN + n):
        w[t + p] = phi @ w[t:t + p][::-1] + e[t]
    return w[p + BURN_IN:]


def _tar_noise(par: dict, n: int, rng: np.random.Generator) -> NDArray:
    tau, a, b, r, g = (float(par[k]) for k in ("tau", "alpha", "beta", "r", "gamma"))
    e = rng.standard_normal(BURN_IN + n) * tau
    w = np.empty(BURN_IN + n)
    prev = float(par["w0"])
    for t in range(BURN_IN + n):
        prev = 1.0 + a * prev + e[t] if prev <= r else -1.0 + b * prev + g * e[t]
        w[t] = prev
    return w[BURN_IN:]


def generate_noise(spec: GeneratorSpec) -> NDArray[np.float64]:
    """The stochastic component ``W_t`` of a design, length ``spec.n``."""
    spec.validate()
    par = spec.resolved()
    rng = rng_stream(spec.seed, spec.realization)
    if GeneratorKind(spec.kind) is GeneratorKind.AR5_SINE:
        return _ar_noise(np.asarray(par["phi"], dtype=float), float(par["tau"]), spec.n, rng)
    return _tar_noise(par, spec.n, rng)


def trend(spec: GeneratorSpec) -> NDArray[np.float64]:
    """Deterministic mean ``amplitude * sin(2 pi a_t)`` with ``a_t = (t-1)/n``."""
    a = np.arange(spec.n) / spec.n
    return float(spec.resolved()["amplitude"]) * np.sin(2 * np.pi * a)


def generate(spec: GeneratorSpec) -> TimeSeries:
    """Simulate one realization of the design.

    Examples
    --------
    >>> s = generate(GeneratorSpec(GeneratorKind.AR5_SINE, n=100, seed=1))
    >>> len(s)
    100
    """
    return TimeSeries(trend(spec) + generate_noise(spec), label=f"{GeneratorKind(spec.kind).value}")


_SPLIT = re.compile(r"[,\s;]+")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def ingest_csv(path, value_col: int = -1, age_col: Optional[int] = 0) -> TimeSeries:
    """Read a one- or two-column numeric file.

    Parameters
    ----------
    path : str or Path
    value_col : int
        Column holding the observations (default: last column).
    age_col : int or None
        Column holding age stamps; ignored for single-column files.

    Lines starting with ``#`` and blank lines are skipped.  A first row made
    only of non-numeric tokens is treated as a header.  Descending ages are
    reversed so the index runs forward in calendar time.
    """
    rows = []
    seen_data = False
    with open(Path(path), newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            toks = [t for t in _SPLIT.split(line) if t]
            nums = [_is_number(t) for t in toks]
            if not seen_data and not any(nums):
                seen_data = True
                continue
            seen_data = True
            if not all(nums):
                raise ValueError(f"line {lineno}: cannot parse {line!r}")
            rows.append([float(t) for t in toks])
    if len(rows) < 2:
        raise ValueError("need at least two usable rows")
    width = min(len(r) for r in rows)
    if width != max(len(r) for r in rows):
        raise ValueError("rows have inconsistent column counts")
    arr = np.asarray(rows)
    values = arr[:, value_col]
    ages = None
    if width >= 2 and age_col is not None:
        ages = arr[:, age_col]
        if ages.size > 1 and ages[1] < ages[0]:
            ages = ages[::-1].copy()
            values = values[::-1].copy()
    return TimeSeries(values, ages, label=Path(path).stem)


@dataclass(frozen=True)
class EvalMetrics:
    bias: float
    mse: float
    cvr: float = float("nan")
    mean_length: float = float("nan")
    sd_length: float = float("nan")
    n_realizations: int = 0

    def as_dict(self) -> dict:
        return {"bias": self.bias, "mse": self.mse, "cvr": self.cvr,
                "mean_length": self.mean_length, "sd_length": self.sd_length,
                "n_realizations": self.n_realizations}


def score(predictions: Iterable[float], truths: Iterable[float],
          intervals: Optional[Iterable[tuple]] = None) -> EvalMetrics:
    """Bias, MSE, coverage and interval-length summaries.

    >>> score([1, 3], [2, 2]).mse
    1.0
    """
    pred = np.asarray(list(predictions), dtype=float)
    truth = np.asarray(list(truths), dtype=float)
    if pred.size == 0:
        raise ValueError("empty input")
    if pred.shape != truth.shape:
        raise ValueError("predictions and truths differ in length")
    err = pred - truth
    cvr = mean_len = sd_len = float("nan")
    if intervals is not None:
        iv = np.asarray(list(intervals), dtype=float).reshape(-1, 2)
        if iv.shape[0] != pred.size:
            raise ValueError("intervals and truths differ in length")
        cvr = float(np.mean((iv[:, 0] <= truth) & (truth <= iv[:, 1])))
        lengths = iv[:, 1] - iv[:, 0]
        mean_len = float(np.mean(lengths))
        sd_len = float(np.std(lengths, ddof=1)) if lengths.size > 1 else 0.0
    return EvalMetrics(float(np.mean(err)), float(np.mean(err ** 2)), cvr,
                       mean_len, sd_len, int(pred.size))
