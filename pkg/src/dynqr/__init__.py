"""dynqr: joint dynamic quantile estimation with a crossing penalty.

Fits several conditional quantile curves at once, where each curve may
depend on its own lag, by minimising a pinball-loss objective plus a
penalty on the depth of adjacent-quantile crossings with an evolution
strategy.  Includes a Monte Carlo generator with known true quantiles,
probabilistic forecast scoring, and an expanding-window backtester.
"""
from .backtest import BacktestPlan, BacktestResult, ForecastRecord, one_step_forecast, run_backtest
from .core import (CoefficientSet, FittedQuantilePaths, ModelSpec, QuantileGrid,
                   SeriesData, build_design, crossing_distance, dynqr_objective,
                   pinball_loss, quantile_recursion)
from .dgp import (DgpConfig, SimulatedDataset, inverse_normal_cdf,
                  make_coefficients, run_replications, simulate_path)
from .fitter import (FitRequest, FitResult, fit, pack_coefficients, qr_oracle,
                     unpack_coefficients)
from .optim import (OptimOptions, OptimResult, OptimState, cmaes_minimize,
                    nelder_mead_minimize)
from .scoring import (ScoreReport, coefficient_bias, crossing_incidence, qwcrps,
                      quantile_score, rearrange, score_forecasts)
from .study import EstimatorSpec, StudyPlan, StudyResult, run_study

__version__ = "0.1.0"

__all__ = [
    "BacktestPlan", "BacktestResult", "CoefficientSet", "DgpConfig",
    "EstimatorSpec", "FitRequest", "FitResult", "FittedQuantilePaths",
    "ForecastRecord", "ModelSpec", "OptimOptions", "OptimResult", "OptimState",
    "QuantileGrid", "ScoreReport", "SeriesData", "SimulatedDataset", "StudyPlan",
    "StudyResult", "build_design", "cmaes_minimize", "coefficient_bias",
    "crossing_distance", "crossing_incidence", "dynqr_objective", "fit",
    "inverse_normal_cdf", "make_coefficients", "nelder_mead_minimize",
    "one_step_forecast", "pack_coefficients", "pinball_loss", "qr_oracle",
    "quantile_recursion", "quantile_score", "qwcrps", "rearrange",
    "run_backtest", "run_replications", "run_study", "score_forecasts",
    "simulate_path", "unpack_coefficients",
]
