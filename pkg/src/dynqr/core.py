"""Model types, quantile recursion, and the penalised objective.

The conditional quantile of ``y_t`` at level ``tau`` follows

    q[t, tau] = x_t' beta[tau] + theta[tau] * q[t-1, tau]

where ``x_t`` is a design row (intercept, optional lag/asymmetric-slope
terms, exogenous covariates) and ``theta`` controls quantile inertia.
Fitting minimises the average pinball loss across a grid of levels plus a
penalty proportional to the average depth of adjacent-quantile crossings.

All evaluation kernels accept a leading batch axis on the coefficient
arrays so a whole optimizer population can be scored in one numpy pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuantileGrid",
    "SeriesData",
    "ModelSpec",
    "CoefficientSet",
    "FittedQuantilePaths",
    "build_design",
    "pinball_loss",
    "quantile_recursion",
    "crossing_distance",
    "dynqr_objective",
    "objective_components",
    "combine_objective",
]


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class QuantileGrid:
    """Ordered set of target quantile levels, all in the open unit interval."""

    levels: np.ndarray

    def __post_init__(self):
        self.levels = np.atleast_1d(np.asarray(self.levels, dtype=float))
        if self.levels.ndim != 1 or self.levels.size < 1:
            raise ValueError("grid needs at least one level")
        if np.any(self.levels <= 0.0) or np.any(self.levels >= 1.0):
            raise ValueError("quantile levels must lie strictly inside (0, 1)")
        if np.any(np.diff(self.levels) <= 0.0):
            raise ValueError("quantile levels must be strictly increasing")

    @property
    def size(self) -> int:
        return int(self.levels.size)

    def index_of(self, tau: float, tol: float = 1e-12) -> int:
        """Position of level ``tau`` on the grid (exact up to ``tol``)."""
        hits = np.flatnonzero(np.abs(self.levels - tau) <= tol)
        if hits.size != 1:
            raise ValueError(f"level {tau} is not on the grid")
        return int(hits[0])


@dataclass
class SeriesData:
    """Observed series ``y`` plus an optional block of exogenous covariates."""

    y: np.ndarray
    exog: np.ndarray | None = None
    timestamps: list | None = None
    exog_names: list[str] | None = None

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.y.ndim != 1 or self.y.size == 0:
            raise ValueError("y must be a non-empty vector")
        if self.exog is None:
            self.exog = np.empty((self.y.size, 0))
        self.exog = np.asarray(self.exog, dtype=float)
        if self.exog.ndim == 1:
            self.exog = self.exog[:, None]
        if self.exog.shape[0] != self.y.size:
            raise ValueError("y and exog must have the same number of rows")
        if not np.all(np.isfinite(self.y)) or not np.all(np.isfinite(self.exog)):
            raise ValueError("series data contains non-finite values")
        if self.timestamps is not None and len(self.timestamps) != self.y.size:
            raise ValueError("timestamps length must match y")
        if self.exog_names is not None and len(self.exog_names) != self.exog.shape[1]:
            raise ValueError("exog_names length must match exog columns")

    @property
    def n_obs(self) -> int:
        return int(self.y.size)


@dataclass
class ModelSpec:
    """Shape of the design and of the quantile dynamics.

    Parameters
    ----------
    lag_y : int
        Number of observable lags entering the design (0 or 1).
    asymmetric_slope : bool
        Split the lagged observation's magnitude by sign into two columns
        (leverage-style design); requires ``lag_y >= 1``.
    quantile_lags : int
        Number of lagged-quantile (inertia) terms, 0 or 1.
    include_intercept : bool
        The first design column is a constant one; always true.
    exog_columns : list[int] | None
        Indices of exogenous covariates to include; None means all.
    """

    lag_y: int = 0
    asymmetric_slope: bool = False
    quantile_lags: int = 0
    include_intercept: bool = True
    exog_columns: list[int] | None = None

    def __post_init__(self):
        if self.lag_y not in (0, 1):
            raise ValueError("lag_y must be 0 or 1")
        if self.quantile_lags not in (0, 1):
            raise ValueError("quantile_lags must be 0 or 1")
        if self.asymmetric_slope and self.lag_y < 1:
            raise ValueError("asymmetric_slope requires lag_y >= 1")
        if not self.include_intercept:
            raise ValueError("the design always carries an intercept column")

    def n_design_columns(self, n_exog_available: int) -> int:
        n_lag = 2 if self.asymmetric_slope else self.lag_y
        n_exog = len(self.exog_columns) if self.exog_columns is not None else n_exog_available
        return 1 + n_lag + n_exog

    def design_column_names(self, data: SeriesData) -> list[str]:
        names = ["const"]
        if self.asymmetric_slope:
            names += ["abs_lag_pos", "abs_lag_neg"]
        elif self.lag_y == 1:
            names += ["y_lag1"]
        cols = self.exog_columns if self.exog_columns is not None else range(data.exog.shape[1])
        for j in cols:
            if data.exog_names is not None:
                names.append(data.exog_names[j])
            else:
                names.append(f"x{j}")
        return names


@dataclass
class CoefficientSet:
    """Per-quantile coefficients: ``beta`` is Q x (K+1), ``theta`` is Q x L."""

    beta: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.size == 0:
            self.theta = np.empty((self.beta.shape[0], 0))
        if self.theta.ndim == 1:
            self.theta = self.theta[:, None]
        if self.theta.shape[0] != self.beta.shape[0]:
            raise ValueError("beta and theta must have one row per quantile")
        if self.theta.shape[1] > 1:
            raise ValueError("at most one lagged-quantile term is supported")
        if not np.all(np.isfinite(self.beta)) or not np.all(np.isfinite(self.theta)):
            raise ValueError("coefficients must be finite")

    @property
    def n_quantiles(self) -> int:
        return int(self.beta.shape[0])

    @property
    def n_covariates(self) -> int:
        return int(self.beta.shape[1])

    @property
    def quantile_lags(self) -> int:
        return int(self.theta.shape[1])


@dataclass
class FittedQuantilePaths:
    """T x Q matrix of fitted quantiles plus the pre-sample initial values."""

    values: np.ndarray
    init_values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.init_values = np.atleast_1d(np.asarray(self.init_values, dtype=float))
        if self.values.shape[1] != self.init_values.size:
            raise ValueError("init_values must supply one value per quantile")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("fitted paths contain non-finite values")

    @property
    def n_obs(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_quantiles(self) -> int:
        return int(self.values.shape[1])


def _path_values(paths) -> np.ndarray:
    if isinstance(paths, FittedQuantilePaths):
        return paths.values
    return np.atleast_2d(np.asarray(paths, dtype=float))


# ---------------------------------------------------------------------------
# design construction
# ---------------------------------------------------------------------------

def build_design(data: SeriesData, spec: ModelSpec):
    """Build the T x (K+1) design matrix and the effective-sample mask.

    Column 0 is the intercept.  With ``asymmetric_slope`` the next two
    columns hold the magnitude of the previous observation split by its
    sign (``|y|`` in the matching column, 0 in the other; an exact zero
    lands in neither).  A plain ``lag_y`` contributes one ``y_{t-1}``
    column.  Selected exogenous columns follow.  Rows whose lag is
    undefined (the first observation) are masked out of the loss.
    """
    T = data.n_obs
    if spec.lag_y >= T:
        raise ValueError("lag request exceeds series length")
    cols = [np.ones(T)]
    mask = np.ones(T, dtype=bool)
    if spec.lag_y == 1:
        y_prev = np.empty(T)
        y_prev[0] = 0.0
        y_prev[1:] = data.y[:-1]
        if spec.asymmetric_slope:
            cols.append(np.where(y_prev > 0.0, y_prev, 0.0))
            cols.append(np.where(y_prev < 0.0, -y_prev, 0.0))
        else:
            cols.append(y_prev)
        mask[0] = False
    exog_idx = spec.exog_columns if spec.exog_columns is not None else range(data.exog.shape[1])
    for j in exog_idx:
        cols.append(data.exog[:, j])
    X = np.column_stack(cols)
    return X, mask


# ---------------------------------------------------------------------------
# losses and kernels
# ---------------------------------------------------------------------------

def pinball_loss(u, tau):
    """Check-function loss ``u * (tau - 1{u < 0})``; zero iff the residual is."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0) or np.any(tau >= 1.0):
        raise ValueError("tau must lie in (0, 1)")
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0.0))


def _recursion_kernel(base: np.ndarray, theta: np.ndarray | None,
                      init: np.ndarray) -> np.ndarray:
    """Run q_t = base_t + theta * q_{t-1} along the second-to-last axis.

    ``base`` has shape (..., T, Q); ``theta`` broadcasts against (..., Q)
    or is None when there is no inertia term.  ``init`` seeds q_0.
    """
    if theta is None:
        return base
    paths = np.empty_like(base)
    prev = np.broadcast_to(init, base.shape[:-2] + base.shape[-1:])
    for t in range(base.shape[-2]):
        prev = base[..., t, :] + theta * prev
        paths[..., t, :] = prev
    return paths


def quantile_recursion(coeffs: CoefficientSet, X: np.ndarray, grid: QuantileGrid,
                       init: np.ndarray) -> FittedQuantilePaths:
    """Evaluate the fitted quantile paths for one coefficient set.

    Raises ValueError on non-finite intermediate values (a divergent
    inertia coefficient); the fitting objective instead maps those to a
    worst-fitness sentinel so the optimizer can discard the candidate.
    """
    X = np.asarray(X, dtype=float)
    init = np.atleast_1d(np.asarray(init, dtype=float))
    if coeffs.n_quantiles != grid.size:
        raise ValueError("coefficient rows must match the grid size")
    if coeffs.n_covariates != X.shape[1]:
        raise ValueError("beta columns must match the design")
    if init.size != grid.size:
        raise ValueError("one initial value per quantile is required")
    with np.errstate(over="ignore", invalid="ignore"):
        base = X @ coeffs.beta.T
        theta = coeffs.theta[:, 0] if coeffs.quantile_lags == 1 else None
        values = _recursion_kernel(base, theta, init)
    if not np.all(np.isfinite(values)):
        raise ValueError("quantile recursion produced non-finite values")
    return FittedQuantilePaths(values=values, init_values=init)


def crossing_distance(paths, mask: np.ndarray | None = None) -> float:
    """Average depth of adjacent-quantile crossings over the fitted paths.

    Returns ``sum_t sum_{q>=2} max(0, -(q_t[q] - q_t[q-1]))`` divided by
    ``(Q - 1) * T_eff``; zero exactly when every row is non-decreasing.
    """
    values = _path_values(paths)
    if values.shape[1] < 2:
        raise ValueError("crossing distance needs at least two quantiles")
    if mask is not None:
        values = values[np.asarray(mask, dtype=bool)]
    T_eff = values.shape[0]
    gaps = np.diff(values, axis=1)
    total = np.sum(np.maximum(0.0, -gaps))
    return float(total / ((values.shape[1] - 1) * T_eff))


def objective_components(y: np.ndarray, X: np.ndarray, mask: np.ndarray,
                         levels: np.ndarray, beta: np.ndarray,
                         theta: np.ndarray | None, init: np.ndarray):
    """Pinball and crossing components for (optionally batched) coefficients.

    ``beta`` is (..., Q, K+1) and ``theta`` (..., Q) or None; returns a pair
    of arrays shaped like the batch (scalars for a single coefficient set).
    Non-finite evaluations surface as +inf in the pinball component.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        base = np.einsum("tk,...qk->...tq", X, beta)
        paths = _recursion_kernel(base, theta, init)
        sub = paths[..., mask, :]
        T_eff = int(np.count_nonzero(mask))
        Q = len(levels)
        resid = y[mask][:, None] - sub
        pin = resid * (levels - (resid < 0.0))
        pinball = pin.sum(axis=(-1, -2)) / (Q * T_eff)
        if Q >= 2:
            gaps = np.diff(sub, axis=-1)
            crossing = np.maximum(0.0, -gaps).sum(axis=(-1, -2)) / ((Q - 1) * T_eff)
        else:
            crossing = np.zeros(np.shape(pinball))
    pinball = np.where(np.isfinite(pinball), pinball, np.inf)
    return pinball, crossing


def combine_objective(pinball, crossing, penalty_weight: float):
    """Total objective with non-finite evaluations mapped to +inf."""
    total = pinball + penalty_weight * crossing
    return np.where(np.isfinite(total), total, np.inf)


def dynqr_objective(coeffs: CoefficientSet, data: SeriesData, spec: ModelSpec,
                    grid: QuantileGrid, penalty_weight: float,
                    init: np.ndarray | None = None) -> float:
    """Average pinball loss of the fitted paths plus the crossing penalty.

    With ``penalty_weight = 0`` this is the plain joint multi-quantile
    objective; non-finite recursions return +inf so the evolution strategy
    treats the candidate as worst-possible.
    """
    if penalty_weight < 0.0:
        raise ValueError("penalty_weight must be nonnegative")
    X, mask = build_design(data, spec)
    if init is None:
        init = np.zeros(grid.size)
    init = np.atleast_1d(np.asarray(init, dtype=float))
    theta = coeffs.theta[:, 0] if coeffs.quantile_lags == 1 else None
    pinball, crossing = objective_components(
        data.y, X, mask, grid.levels, coeffs.beta, theta, init)
    if grid.size < 2 or penalty_weight == 0.0:
        return float(pinball)
    return float(combine_objective(pinball, crossing, penalty_weight))
