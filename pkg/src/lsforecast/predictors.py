"""Point predictors: model-based, model-free, limit model-free and discrete mode."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_toeplitz
from scipy.special import ndtr

from .distribution import DistKind, TMode
from .kernels import KernelFamily, KernelSpec
from .linear_prediction import ar_predict, fit_ar_yw
from .series import TimeSeries, rng_stream
from .smoothing import FitMode, extrapolate, fit_trend
from .transform import CovKind, MFState, TransformConfig, forward, g_apply, shift_for

LMF_STREAM = 0x4C4D46
DISCRETE_MAX_LEVELS = 50


class Family(str, enum.Enum):
    MB = "MB"
    MF = "MF"
    PMF = "PMF"
    LMF = "LMF"


class Smoother(str, enum.Enum):
    LC = "LC"
    LL = "LL"
    LLH = "LLH"
    LLM = "LLM"


class Loss(str, enum.Enum):
    L2 = "L2"
    L1 = "L1"


_SMOOTH_KIND = {Smoother.LC: DistKind.LC_SMOOTH, Smoother.LLH: DistKind.LLH_SMOOTH,
                Smoother.LLM: DistKind.LLM}


@dataclass(frozen=True)
class MethodDescriptor:
    """A point-prediction method such as ``MF-LLM-ARMA`` with predictive residuals."""

    family: Family
    smoother: Smoother
    cov_kind: CovKind = CovKind.FLAT_TOP
    residual_type: TMode = TMode.PREDICTIVE
    loss: Loss = Loss.L2

    def __post_init__(self):
        fam, sm = Family(self.family), Smoother(self.smoother)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "smoother", sm)
        object.__setattr__(self, "cov_kind", CovKind(self.cov_kind))
        object.__setattr__(self, "loss", Loss(self.loss))
        rt = TMode.PREDICTIVE if fam is Family.PMF else TMode(self.residual_type)
        object.__setattr__(self, "residual_type", rt)
        if fam is Family.MB and sm not in (Smoother.LC, Smoother.LL):
            raise ValueError("model-based methods use the LC or LL smoother")
        if fam is not Family.MB and sm not in (Smoother.LC, Smoother.LLH, Smoother.LLM):
            raise ValueError("model-free methods use the LC, LLH or LLM smoother")

    @property
    def is_mb(self) -> bool:
        return self.family is Family.MB

    @property
    def base_name(self) -> str:
        fam = "MF" if self.family is Family.PMF else self.family.value
        name = f"{fam}-{self.smoother.value}"
        if not self.is_mb and self.cov_kind is CovKind.AR_IMPLIED:
            name += "-ARMA"
        return name

    @property
    def name(self) -> str:
        return f"{self.base_name}-{'P' if self.residual_type is TMode.PREDICTIVE else 'F'}"

    def dist_kind(self) -> DistKind:
        return _SMOOTH_KIND[self.smoother]

    def fit_mode(self) -> FitMode:
        return FitMode.of(self.smoother.value, self.residual_type is TMode.FITTED)

    def transform_config(self, b: float, h0: Optional[float] = None,
                         family: KernelFamily = KernelFamily.EPANECHNIKOV,
                         grid_size: int = 512) -> TransformConfig:
        return TransformConfig(KernelSpec(family, b), self.dist_kind(), self.residual_type,
                               self.cov_kind, h0, grid_size)

    @classmethod
    def parse(cls, text: str, residual_type=None, cov_kind=None, loss=None) -> "MethodDescriptor":
        """Parse names like ``mf-llm``, ``lmf-llm-ar``, ``MB-LL-P`` or ``pmf-lc``."""
        toks = [t for t in re.split(r"[-_\s]+", text.strip().upper()) if t]
        if len(toks) < 2:
            raise ValueError(f"unknown method {text!r}")
        try:
            fam, sm = Family(toks[0]), Smoother(toks[1])
        except ValueError:
            raise ValueError(f"unknown method {text!r}") from None
        ck, rt = CovKind.FLAT_TOP, TMode.PREDICTIVE
        for tok in toks[2:]:
            if tok in ("AR", "ARMA"):
                ck = CovKind.AR_IMPLIED
            elif tok in ("FT", "FLATTOP"):
                ck = CovKind.FLAT_TOP
            elif tok == "P":
                rt = TMode.PREDICTIVE
            elif tok == "F":
                rt = TMode.FITTED
            else:
                raise ValueError(f"unknown method {text!r}")
        if cov_kind is not None:
            ck = CovKind(cov_kind)
        if residual_type is not None:
            rt = TMode(residual_type)
        return cls(fam, sm, ck, rt, Loss(loss) if loss is not None else Loss.L2)


@dataclass
class PredictionOutcome:
    point: float
    method: Optional[MethodDescriptor] = None
    interval: Optional[tuple] = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"point": self.point,
               "method": self.method.name if self.method is not None else None,
               "loss": self.method.loss.value if self.method is not None else None}
        if self.interval is not None:
            lo, hi, alpha = self.interval
            out["interval"] = {"lo": lo, "hi": hi, "alpha": alpha}
        out["diagnostics"] = {k: v for k, v in self.diagnostics.items()
                              if isinstance(v, (int, float, str, bool, list, type(None)))}
        return out


def _values(series) -> NDArray:
    return np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)


def lower_median(x) -> float:
    s = np.sort(np.asarray(x, dtype=float))
    return float(s[(s.size - 1) // 2])


def reduce_loss(values, loss: Loss) -> float:
    return float(np.mean(values)) if Loss(loss) is Loss.L2 else lower_median(values)


# --- model-based -----------------------------------------------------------

@dataclass(frozen=True)
class MBModel:
    """Fitted model-based predictor: trend fit, residual AR fit and ``Pi``."""

    fit: object
    ar: object
    point: float

    @property
    def residuals(self) -> NDArray:
        return self.fit.residuals


def fit_mb(y, kernel: KernelSpec, mode: FitMode, heteroscedastic: bool = False,
           order: Optional[int] = None, p_max: Optional[int] = None) -> MBModel:
    fit = fit_trend(y, kernel, mode, heteroscedastic)
    w = fit.residuals
    ar = fit_ar_yw(w, p_max=p_max, order=order, offset=fit.start - 1)
    mu, sig = extrapolate(fit)
    return MBModel(fit, ar, mu + sig * ar_predict(ar, w))


def predict_mb(series, kernel: KernelSpec, mode: FitMode = FitMode.LL_PREDICTIVE,
               heteroscedastic: bool = False, method: Optional[MethodDescriptor] = None,
               p_max: Optional[int] = None) -> PredictionOutcome:
    """``Pi = mu(n+1) + sigma(n+1) * sum_i phi_i W_{n+1-i}``."""
    y = _values(series)
    model = fit_mb(y, kernel, FitMode(mode), heteroscedastic, p_max=p_max)
    return PredictionOutcome(model.point, method,
                             diagnostics={"ar_order": model.ar.order_p,
                                          "bandwidth_b": float(kernel.bandwidth_b)})


# --- model-free ------------------------------------------------------------

def mf_point(state: MFState, loss: Loss = Loss.L2) -> float:
    return reduce_loss(state.g(state.epsilon), loss)


def predict_mf(series, config: TransformConfig, loss: Loss = Loss.L2,
               method: Optional[MethodDescriptor] = None) -> PredictionOutcome:
    """Mean (L2) or lower median (L1) of ``g(eps_i)`` over the fitted innovations."""
    state = forward(series, config)
    return PredictionOutcome(mf_point(state, loss), method, diagnostics=_state_diag(state))


def lmf_draws(seed: int, M: int) -> NDArray:
    return rng_stream(seed, LMF_STREAM).standard_normal(M)


def predict_lmf(series, config: TransformConfig, M: int = 1000, seed: int = 0,
                loss: Loss = Loss.L2, method: Optional[MethodDescriptor] = None) -> PredictionOutcome:
    """Monte Carlo average (L2) or median (L1) of ``g(x)`` over ``x ~ N(0,1)``."""
    if M < 1:
        raise ValueError("M must be positive")
    state = forward(series, config)
    point = reduce_loss(state.g(lmf_draws(seed, M)), loss)
    return PredictionOutcome(point, method, diagnostics=_state_diag(state))


def predict_l1_closed_form(series, config: Optional[TransformConfig] = None,
                           state: Optional[MFState] = None) -> float:
    """``D_{n+1}^{-1}(Phi(E[Z_{n+1} | Z_1..Z_n]))`` via the normal equations."""
    if state is None:
        state = forward(series, config)
    g = state.cov_ext.gamma_star
    n = state.n
    phi = solve_toeplitz(g[:n], g[1:n + 1])
    zhat = float(phi @ state.Z[::-1])
    return float(state.field.quantile_row(n + 1, ndtr(zhat))[0])


def _state_diag(state: MFState) -> dict:
    return {"bandwidth_b": state.config.b, "h0": state.field.h0,
            "pd_shrink": state.cov_ext.pd_shrink, "band_l": state.cov_ext.band_l,
            "ar_order": state.ar_fit.order_p if state.ar_fit is not None else None}


# --- discrete-valued data --------------------------------------------------

@dataclass(frozen=True)
class DiscretePrediction:
    mode: float
    levels: NDArray
    probabilities: NDArray
    draws: NDArray


def predict_discrete_mode(series, config: TransformConfig, B: int = 1000,
                          seed: int = 0) -> DiscretePrediction:
    """Bootstrap predictive distribution of a discrete-valued ``Y_{n+1}`` and its mode.

    Step-function marginal estimates keep every draw inside the observed
    alphabet.  Ties in the probability integral transform are broken by
    uniform jittering so the Gaussianized series is continuous.
    """
    y = _values(series)
    levels = np.unique(y)
    if levels.size > DISCRETE_MAX_LEVELS:
        raise ValueError(f"{levels.size} distinct values: use a continuous predictor")
    if levels.size == 1:
        draws = np.full(B, levels[0])
        return DiscretePrediction(float(levels[0]), levels, np.ones(1), draws)
    kind = config.dist_kind
    if kind.smooth:
        kind = DistKind.LLH_STEP if kind is DistKind.LLH_SMOOTH else DistKind.LC_STEP
    cfg = replace(config, dist_kind=kind, h0=None)
    base = forward(y, cfg, pit_rng=rng_stream(seed, 0))
    draws = np.empty(B)
    for r in range(B):
        rng = rng_stream(seed, 1, r)
        ystar = base.inverse(rng.standard_normal(y.size))
        if np.unique(ystar).size < 2:
            # a degenerate pseudo-series carries no dependence information
            draws[r] = ystar[0]
            continue
        st = forward(ystar, cfg, pit_rng=rng)
        shift = shift_for(st, y, pit_rng=rng)
        draws[r] = g_apply(st.field, shift, st.c_last, rng.standard_normal())[0]
    vals, counts = np.unique(draws, return_counts=True)
    mode = float(vals[int(np.argmax(counts))])
    return DiscretePrediction(mode, vals, counts / B, draws)


# --- dispatch --------------------------------------------------------------

def predict(series, method: MethodDescriptor, b: float, h0: Optional[float] = None,
            seed: int = 0, M: int = 1000, kernel_family: KernelFamily = KernelFamily.EPANECHNIKOV,
            heteroscedastic: bool = False, grid_size: int = 512) -> PredictionOutcome:
    """Point prediction of ``Y_{n+1}`` by any method of the matrix."""
    if method.is_mb:
        return predict_mb(series, KernelSpec(kernel_family, b), method.fit_mode(),
                          heteroscedastic, method)
    cfg = method.transform_config(b, h0, kernel_family, grid_size)
    if method.family is Family.LMF:
        return predict_lmf(series, cfg, M, seed, method.loss, method)
    return predict_mf(series, cfg, method.loss, method)
