"""Estimation driver: packs coefficients, sets bounds, runs the optimizer.

The full parameter vector stacks every quantile's covariate coefficients
(rows by ascending level) followed by every quantile's inertia
coefficient.  Inertia coefficients are box-bounded to [-1, 1] so the
recursion stays stable; covariate coefficients get a wide stability box.
``qr_oracle`` solves small static quantile regressions exactly by
enumerating observation subsets, and is the reference the fitted
solutions are judged against in tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (CoefficientSet, FittedQuantilePaths, ModelSpec, QuantileGrid,
                   SeriesData, build_design, combine_objective,
                   objective_components, quantile_recursion)
from .optim import OptimOptions, OptimResult, cmaes_minimize, nelder_mead_minimize

__all__ = [
    "FitRequest",
    "FitResult",
    "pack_coefficients",
    "unpack_coefficients",
    "fit",
    "qr_oracle",
]

BETA_BOUND = 1e3        # sampler-stability box for covariate coefficients
THETA_BOUND = 1.0       # inertia box keeping the recursion stationary
_WARM_START_DRAWS = 1000


@dataclass
class FitRequest:
    """Everything ``fit`` needs besides the data itself.

    ``init_strategy`` picks the optimizer's starting coefficients
    ("zeros", "qr_warm_start", or "explicit" with ``init_coefficients``);
    ``recursion_init`` seeds the pre-sample quantile ("empirical" uses the
    per-level sample quantile of y, "zeros" matches the simulation setup).
    """

    spec: ModelSpec
    grid: QuantileGrid
    penalty_weight: float = 0.0
    optimizer: str = "cmaes"
    init_strategy: str = "zeros"
    init_coefficients: CoefficientSet | None = None
    recursion_init: str = "empirical"
    optim_options: OptimOptions | None = None
    sigma0: float = 0.5
    beta_bound: float = BETA_BOUND
    seed: int = 0

    def __post_init__(self):
        if self.penalty_weight < 0.0:
            raise ValueError("penalty_weight must be nonnegative")
        if self.optimizer not in ("cmaes", "nelder_mead"):
            raise ValueError("optimizer must be 'cmaes' or 'nelder_mead'")
        if self.init_strategy not in ("zeros", "qr_warm_start", "explicit"):
            raise ValueError("unknown init_strategy")
        if self.init_strategy == "explicit" and self.init_coefficients is None:
            raise ValueError("explicit init requires init_coefficients")
        if self.recursion_init not in ("empirical", "zeros"):
            raise ValueError("recursion_init must be 'empirical' or 'zeros'")


@dataclass
class FitResult:
    coefficients: CoefficientSet
    paths: FittedQuantilePaths
    objective_value: float
    pinball_component: float
    penalty_component: float
    crossing_incidence_pct: float
    optim_diagnostics: OptimResult
    effective_mask: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))


# ---------------------------------------------------------------------------
# packing
# ---------------------------------------------------------------------------

def pack_coefficients(coeffs: CoefficientSet) -> np.ndarray:
    """Flatten to (Q*(K+1) + Q*L,): beta rows by ascending level, then theta."""
    return np.concatenate([coeffs.beta.ravel(), coeffs.theta.ravel()])


def unpack_coefficients(vec: np.ndarray, n_quantiles: int, n_covariates: int,
                        quantile_lags: int) -> CoefficientSet:
    vec = np.asarray(vec, dtype=float)
    expected = n_quantiles * n_covariates + n_quantiles * quantile_lags
    if vec.size != expected:
        raise ValueError(f"expected a vector of length {expected}, got {vec.size}")
    n_beta = n_quantiles * n_covariates
    beta = vec[:n_beta].reshape(n_quantiles, n_covariates)
    theta = vec[n_beta:].reshape(n_quantiles, quantile_lags)
    return CoefficientSet(beta=beta, theta=theta)


def _batched_unpack(params: np.ndarray, Q: int, K1: int, L: int):
    params = np.atleast_2d(params)
    beta = params[:, :Q * K1].reshape(params.shape[0], Q, K1)
    theta = params[:, Q * K1:].reshape(params.shape[0], Q) if L == 1 else None
    return beta, theta


def _recursion_init_values(data: SeriesData, grid: QuantileGrid, how: str) -> np.ndarray:
    if how == "zeros":
        return np.zeros(grid.size)
    return np.quantile(data.y, grid.levels)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _make_objective(data, spec, grid, penalty_weight, init_values):
    """Vectorized map from packed parameter batches to objective values."""
    X, mask = build_design(data, spec)
    Q, K1, L = grid.size, X.shape[1], spec.quantile_lags
    levels = grid.levels

    def batch_objective(params):
        beta, theta = _batched_unpack(params, Q, K1, L)
        pinball, crossing = objective_components(
            data.y, X, mask, levels, beta, theta, init_values)
        if Q < 2:
            return np.where(np.isfinite(pinball), pinball, np.inf)
        return combine_objective(pinball, crossing, penalty_weight)

    return batch_objective, X, mask


def _single_quantile_start(data, spec, grid_level, seed, max_iters):
    """Static per-level fit used by the warm start (no penalty, no inertia)."""
    static_spec = ModelSpec(lag_y=spec.lag_y, asymmetric_slope=spec.asymmetric_slope,
                            quantile_lags=0, exog_columns=spec.exog_columns)
    sub_grid = QuantileGrid([grid_level])
    init_values = np.quantile(data.y, sub_grid.levels)
    objective, X, _ = _make_objective(data, static_spec, sub_grid, 0.0, init_values)
    n = X.shape[1]
    lo = np.full(n, -BETA_BOUND)
    hi = np.full(n, BETA_BOUND)
    opts = OptimOptions(max_iters=max_iters, bounds=(lo, hi), seed=seed,
                        vectorized=True, tol_fun=1e-11)
    res = cmaes_minimize(objective, np.zeros(n), 0.5, opts)
    return res.best_point


def _warm_start(data, spec, grid, seed_seq):
    """Per-level static fits, then a uniform search over each inertia
    coefficient holding those covariate coefficients fixed."""
    X, mask = build_design(data, spec)
    K1 = X.shape[1]
    beta0 = np.empty((grid.size, K1))
    seeds = seed_seq.spawn(grid.size + 1)
    for q, tau in enumerate(grid.levels):
        beta0[q] = _single_quantile_start(
            data, spec, tau, int(seeds[q].generate_state(1)[0]), max_iters=250)
    theta0 = np.zeros((grid.size, spec.quantile_lags))
    if spec.quantile_lags == 1:
        rng = np.random.default_rng(seeds[-1])
        draws = rng.uniform(0.0, 1.0, _WARM_START_DRAWS)
        for q, tau in enumerate(grid.levels):
            sub_grid = QuantileGrid([tau])
            init_values = np.quantile(data.y, sub_grid.levels)
            objective, _, _ = _make_objective(data, spec, sub_grid, 0.0,
                                              init_values)
            cand = np.column_stack([np.tile(beta0[q], (_WARM_START_DRAWS, 1)), draws])
            vals = objective(cand)
            theta0[q, 0] = draws[int(np.argmin(vals))]
    return CoefficientSet(beta=beta0, theta=theta0)


def fit(data: SeriesData, req: FitRequest) -> FitResult:
    """Minimise the penalised objective and report the decomposed solution.

    The bound box keeps every inertia coefficient inside [-1, 1]; the
    reported objective always equals ``pinball + penalty_weight * penalty``
    evaluated at the returned coefficients.
    """
    spec, grid = req.spec, req.grid
    X, mask = build_design(data, spec)
    Q, K1, L = grid.size, X.shape[1], spec.quantile_lags
    n = Q * K1 + Q * L
    init_values = _recursion_init_values(data, grid, req.recursion_init)
    objective, _, _ = _make_objective(data, spec, grid, req.penalty_weight,
                                      init_values)

    lo = np.concatenate([np.full(Q * K1, -req.beta_bound), np.full(Q * L, -THETA_BOUND)])
    hi = np.concatenate([np.full(Q * K1, req.beta_bound), np.full(Q * L, THETA_BOUND)])

    seed_seq = np.random.SeedSequence(req.seed)
    warm_seq, main_seq = seed_seq.spawn(2)
    if req.init_strategy == "zeros":
        x0 = np.zeros(n)
    elif req.init_strategy == "explicit":
        x0 = pack_coefficients(req.init_coefficients)
        if x0.size != n:
            raise ValueError("init_coefficients do not match the model dimensions")
    else:
        x0 = pack_coefficients(_warm_start(data, spec, grid, warm_seq))

    base = req.optim_options or OptimOptions()
    scales = np.concatenate([np.ones(Q * K1), np.full(Q * L, 0.4)])
    opts = OptimOptions(max_iters=base.max_iters, tol_fun=base.tol_fun,
                        tol_x=base.tol_x, bounds=(lo, hi),
                        pop_size=base.pop_size, x_scales=scales,
                        seed=int(main_seq.generate_state(1)[0]), vectorized=True)

    if req.optimizer == "cmaes":
        diag = cmaes_minimize(objective, x0, req.sigma0, opts)
    else:
        def scalar_objective(x):
            return float(objective(x[None, :])[0])
        diag = nelder_mead_minimize(scalar_objective, x0, opts)

    coeffs = unpack_coefficients(diag.best_point, Q, K1, L)
    paths = quantile_recursion(coeffs, X, grid, init_values)
    theta_vec = coeffs.theta[:, 0] if L == 1 else None
    pinball, crossing = objective_components(
        data.y, X, mask, grid.levels, coeffs.beta, theta_vec, init_values)
    pinball = float(pinball)
    crossing = float(crossing) if Q >= 2 else 0.0
    objective_value = pinball + req.penalty_weight * crossing

    if Q >= 2:
        from .scoring import crossing_incidence
        incidence = crossing_incidence(paths.values[mask])
    else:
        incidence = 0.0
    return FitResult(coefficients=coeffs, paths=paths,
                     objective_value=objective_value,
                     pinball_component=pinball, penalty_component=crossing,
                     crossing_incidence_pct=incidence,
                     optim_diagnostics=diag, effective_mask=mask)


# ---------------------------------------------------------------------------
# exact small-instance quantile-regression oracle
# ---------------------------------------------------------------------------

def qr_oracle(y: np.ndarray, X: np.ndarray, tau: float,
              mask: np.ndarray | None = None):
    """Exact static quantile regression by subset enumeration.

    Some optimal quantile-regression fit interpolates K+1 observations,
    so trying every size-(K+1) subset and keeping the interpolating fit
    with the lowest total pinball loss is exact.  Restricted to small
    instances (T <= 60, K+1 <= 3).

    Returns ``(coefficients, total_loss)``.
    """
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if mask is not None:
        keep = np.asarray(mask, dtype=bool)
        y, X = y[keep], X[keep]
    T, K1 = X.shape
    if T > 60 or K1 > 3:
        raise ValueError("oracle is restricted to T <= 60 and K+1 <= 3")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")

    subsets = np.array(list(combinations(range(T), K1)))
    A = X[subsets]                       # (n_subsets, K1, K1)
    b = y[subsets]
    dets = np.linalg.det(A)
    ok = np.abs(dets) > 1e-10 * max(1.0, float(np.abs(A).max()) ** K1)
    if not np.any(ok):
        raise ValueError("all observation subsets are singular")
    coefs = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
    resid = y[None, :] - coefs @ X.T
    losses = np.sum(resid * (tau - (resid < 0.0)), axis=1)
    best = int(np.argmin(losses))
    return coefs[best], float(losses[best])
