"""Forecasting locally stationary time series with model-based and model-free methods."""
from .series import (EvalMetrics, GeneratorKind, GeneratorSpec, TimeSeries, generate,
                     ingest_csv, score)
from .kernels import KernelFamily, KernelSpec
from .smoothing import FitMode, TrendFit, extrapolate, fit_trend
from .linear_prediction import ARFit, ar_autocov_extend, ar_predict, fit_ar_yw, sample_autocov
from .distribution import DistKind, DistributionEstimate, TMode, estimate_cdf, global_empirical
from .transform import CovKind, MFState, TransformConfig, forward
from .predictors import (Family, Loss, MethodDescriptor, PredictionOutcome, Smoother, predict,
                         predict_discrete_mode, predict_l1_closed_form, predict_lmf, predict_mb,
                         predict_mf)

__version__ = "0.1.0"
