"""Evaluation metrics: coefficient bias, crossing incidence, rearrangement,
and quantile-weighted forecast scores."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CoefficientSet, FittedQuantilePaths, QuantileGrid

__all__ = [
    "WEIGHT_SCHEMES",
    "ScoreReport",
    "scheme_weights",
    "coefficient_bias",
    "crossing_incidence",
    "rearrange",
    "quantile_score",
    "qwcrps",
    "score_forecasts",
]

WEIGHT_SCHEMES = ("uniform", "centre", "left_tail", "right_tail")


def scheme_weights(levels: np.ndarray, scheme: str) -> np.ndarray:
    """Per-level weights: equal, hump-shaped (centre), or tail-emphasising."""
    levels = np.asarray(levels, dtype=float)
    if scheme == "uniform":
        return np.full(levels.size, 1.0 / levels.size)
    if scheme == "centre":
        return levels * (1.0 - levels)
    if scheme == "left_tail":
        return (1.0 - levels) ** 2
    if scheme == "right_tail":
        return levels**2
    raise ValueError(f"unknown weight scheme {scheme!r}")


@dataclass
class ScoreReport:
    """Aggregate scores for one forecast set (one sorted/unsorted variant)."""

    sorted_variant: bool
    qs_total: float
    qwcrps_by_scheme: dict
    per_observation: np.ndarray = field(default_factory=lambda: np.empty(0))


def _values(paths) -> np.ndarray:
    if isinstance(paths, FittedQuantilePaths):
        return paths.values
    return np.atleast_2d(np.asarray(paths, dtype=float))


def coefficient_bias(estimates: list[CoefficientSet], truths: list[CoefficientSet],
                     grid: QuantileGrid, tau: float) -> float:
    """Mean absolute coefficient deviation at one level, averaged over
    replications.  Inertia coefficients enter only when the estimated
    specification carries them."""
    if len(estimates) != len(truths) or not estimates:
        raise ValueError("estimates and truths must be equally long and non-empty")
    q = grid.index_of(tau)
    per_rep = []
    for est, tru in zip(estimates, truths):
        if est.n_covariates != tru.n_covariates:
            raise ValueError("estimate and truth covariate counts differ")
        devs = np.abs(est.beta[q] - tru.beta[q])
        if est.quantile_lags:
            devs = np.concatenate([devs, np.abs(est.theta[q] - tru.theta[q])])
        per_rep.append(devs.mean())
    return float(np.mean(per_rep))


def crossing_incidence(paths) -> float:
    """Percentage of entries that move when each row is sorted ascending."""
    values = _values(paths)
    if values.shape[1] < 2:
        raise ValueError("crossing incidence needs at least two quantiles")
    mismatch = values != np.sort(values, axis=1, kind="stable")
    return float(100.0 * np.count_nonzero(mismatch) / values.size)


def rearrange(quantile_vector) -> np.ndarray:
    """Monotone rearrangement: sort the forecast vector(s) ascending."""
    arr = np.asarray(quantile_vector, dtype=float)
    return np.sort(arr, axis=-1, kind="stable")


def quantile_score(y, q, tau) -> float:
    """QS = 2 (1{y <= q} - tau)(q - y); twice the pinball loss of y - q."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0) or np.any(tau >= 1.0):
        raise ValueError("tau must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    return 2.0 * ((y <= q) - tau) * (q - y)


def qwcrps(forecasts: np.ndarray, realized: np.ndarray, grid: QuantileGrid,
           scheme: str = "uniform", return_per_observation: bool = False):
    """Quantile-weighted CRPS: the weighted sum of quantile scores across
    the grid, averaged over observations."""
    forecasts = np.atleast_2d(np.asarray(forecasts, dtype=float))
    realized = np.atleast_1d(np.asarray(realized, dtype=float))
    if forecasts.shape != (realized.size, grid.size):
        raise ValueError("forecasts must be (n_obs, n_levels)")
    qs = quantile_score(realized[:, None], forecasts, grid.levels)
    per_obs = qs @ scheme_weights(grid.levels, scheme)
    if return_per_observation:
        return float(per_obs.mean()), per_obs
    return float(per_obs.mean())


def score_forecasts(forecasts: np.ndarray, realized: np.ndarray,
                    grid: QuantileGrid, sort: bool = False) -> ScoreReport:
    """Full report over every weighting scheme, optionally on the
    rearranged forecasts."""
    use = rearrange(forecasts) if sort else np.atleast_2d(np.asarray(forecasts, float))
    by_scheme = {}
    per_obs_uniform = None
    for scheme in WEIGHT_SCHEMES:
        total, per_obs = qwcrps(use, realized, grid, scheme, return_per_observation=True)
        by_scheme[scheme] = total
        if scheme == "uniform":
            per_obs_uniform = per_obs
    return ScoreReport(sorted_variant=sort, qs_total=by_scheme["uniform"],
                       qwcrps_by_scheme=by_scheme, per_observation=per_obs_uniform)
