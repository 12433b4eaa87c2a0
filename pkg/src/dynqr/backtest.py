"""Expanding-window one-step-ahead forecasting.

Each origin fits the model on every observation up to and including the
origin, then advances the quantile recursion one step: the forecast for
``origin + 1`` combines the next design row with the fitted quantile at
the origin.  With ``T`` observations and an initial window of ``W`` the
run produces ``T - W - 1`` records (the paper-style window count); the
final observation is never forecast.  A rolling fixed-width mode is kept
for coefficient-stability studies.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (CoefficientSet, FittedQuantilePaths, ModelSpec, QuantileGrid,
                   SeriesData, build_design, quantile_recursion)
from .fitter import FitRequest, FitResult, fit
from .scoring import ScoreReport, score_forecasts

__all__ = [
    "BacktestPlan",
    "ForecastRecord",
    "BacktestResult",
    "one_step_forecast",
    "run_backtest",
]


@dataclass
class BacktestPlan:
    """Window layout plus the fit template applied at every origin."""

    fit_template: FitRequest
    initial_window: int = 100
    horizon: int = 1
    refit_every: int = 1
    window_mode: str = "expanding"       # or "rolling" (fixed width)
    rolling_width: int | None = None     # defaults to initial_window
    warm_start: bool = True

    def __post_init__(self):
        if self.horizon != 1:
            raise ValueError("only one-step-ahead forecasting is supported")
        if self.initial_window < self.fit_template.spec.lag_y + 1:
            raise ValueError("initial_window must exceed the maximum lag")
        if self.refit_every < 1:
            raise ValueError("refit_every must be positive")
        if self.window_mode not in ("expanding", "rolling"):
            raise ValueError("window_mode must be 'expanding' or 'rolling'")


@dataclass
class ForecastRecord:
    origin_index: int                    # index of the last in-sample observation
    forecast_quantiles: np.ndarray       # length Q, for observation origin+1
    realized: float                      # y[origin_index + 1]
    coefficients: CoefficientSet


@dataclass
class BacktestResult:
    records: list
    grid: QuantileGrid
    report_unsorted: ScoreReport
    report_sorted: ScoreReport

    @property
    def forecast_matrix(self) -> np.ndarray:
        return np.array([r.forecast_quantiles for r in self.records])

    @property
    def realized(self) -> np.ndarray:
        return np.array([r.realized for r in self.records])


def one_step_forecast(coeffs: CoefficientSet, spec: ModelSpec, data: SeriesData,
                      origin_index: int, last_paths: FittedQuantilePaths) -> np.ndarray:
    """Quantile vector for ``origin_index + 1`` given a fit through the origin.

    The next design row is built from the observed value at the origin and
    the exogenous covariates at the forecast date, which must be available.
    """
    t_next = origin_index + 1
    y_prev = data.y[origin_index]
    row = [1.0]
    if spec.lag_y == 1:
        if spec.asymmetric_slope:
            row += [y_prev if y_prev > 0.0 else 0.0,
                    -y_prev if y_prev < 0.0 else 0.0]
        else:
            row += [y_prev]
    exog_idx = (spec.exog_columns if spec.exog_columns is not None
                else range(data.exog.shape[1]))
    for j in exog_idx:
        if t_next >= data.exog.shape[0]:
            raise ValueError(f"missing exogenous value at index {t_next}")
        row.append(data.exog[t_next, j])
    x_next = np.array(row)
    forecast = coeffs.beta @ x_next
    if coeffs.quantile_lags == 1:
        forecast = forecast + coeffs.theta[:, 0] * last_paths.values[-1]
    return forecast


def _window_data(data: SeriesData, start: int, stop: int) -> SeriesData:
    ts = data.timestamps[start:stop] if data.timestamps is not None else None
    return SeriesData(y=data.y[start:stop], exog=data.exog[start:stop],
                      timestamps=ts, exog_names=data.exog_names)


def run_backtest(data: SeriesData, plan: BacktestPlan) -> BacktestResult:
    """Walk the origins, fit, forecast one step, then score both the raw
    and the rearranged forecast vectors under every weighting scheme."""
    T = data.n_obs
    W = plan.initial_window
    if T < W + 2:
        raise ValueError("series is too short for the initial window")
    template = plan.fit_template
    grid = template.grid
    width = plan.rolling_width or W

    records = []
    last_fit: FitResult | None = None
    last_coeffs: CoefficientSet | None = None
    for step, n_in_sample in enumerate(range(W, T - plan.horizon)):
        start = 0 if plan.window_mode == "expanding" else max(0, n_in_sample - width)
        window = _window_data(data, start, n_in_sample)
        refit = step % plan.refit_every == 0
        req = template
        if refit:
            if plan.warm_start and last_fit is not None:
                req = replace(template, init_strategy="explicit",
                              init_coefficients=last_fit.coefficients)
            try:
                last_fit = fit(window, req)
            except Exception as exc:
                raise RuntimeError(
                    f"window fit failed at origin {n_in_sample - 1}: {exc}") from exc
            last_coeffs = last_fit.coefficients
        # filter the fitted paths through the current window so the lagged
        # quantile at the origin reflects all observed data
        X, _ = build_design(window, template.spec)
        paths = quantile_recursion(last_coeffs, X, grid, last_fit.paths.init_values)
        origin = n_in_sample - 1
        fq = one_step_forecast(last_coeffs, template.spec, data, origin, paths)
        records.append(ForecastRecord(origin_index=origin,
                                      forecast_quantiles=fq,
                                      realized=float(data.y[origin + 1]),
                                      coefficients=last_coeffs))

    forecasts = np.array([r.forecast_quantiles for r in records])
    realized = np.array([r.realized for r in records])
    return BacktestResult(records=records, grid=grid,
                          report_unsorted=score_forecasts(forecasts, realized, grid, sort=False),
                          report_sorted=score_forecasts(forecasts, realized, grid, sort=True))
