"""Derivative-free minimizers.

``cmaes_minimize`` is a covariance-matrix-adaptation evolution strategy:
each generation samples a population from N(mean, sigma^2 C), keeps the
top quarter by fitness, recombines them with superlinearly decaying rank
weights, and adapts C (rank-one plus rank-mu updates) and the step size
(cumulative step-size adaptation).  Selection is purely rank based, so
the iterates are invariant under order-preserving transformations of the
objective.

``nelder_mead_minimize`` is a bound-constrained simplex search used as
the baseline optimizer; trial points outside the box are clipped onto it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "OptimOptions",
    "OptimResult",
    "OptimState",
    "selection_weights",
    "cmaes_minimize",
    "nelder_mead_minimize",
]

_TOL_WINDOW = 30          # generations over which the fitness spread is judged
_MAX_CONDITION = 1e14     # covariance condition number triggering repair
_BOUND_RESAMPLES = 10     # resampling rounds before clipping to the box


@dataclass
class OptimOptions:
    """Stopping rules, bounds and population overrides for both solvers."""

    max_iters: int | None = None
    tol_fun: float = 1e-10
    tol_x: float = 1e-12
    bounds: tuple | None = None          # (lo, hi) arrays, or None
    pop_size: int | None = None
    x_scales: np.ndarray | None = None   # per-coordinate sampling scales
    seed: int = 0
    vectorized: bool = False             # f accepts (P, n) and returns (P,)

    def __post_init__(self):
        if self.tol_fun <= 0.0 or self.tol_x <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.bounds is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.bounds)
            if np.any(lo > hi):
                raise ValueError("lower bounds exceed upper bounds")
            self.bounds = (lo, hi)


@dataclass
class OptimResult:
    best_point: np.ndarray
    best_value: float
    evaluations: int
    trace: list = field(default_factory=list)   # (generation, best_f, median_f)
    termination_reason: str = "max_iters"
    best_points_per_generation: list = field(default_factory=list)


@dataclass
class OptimState:
    """Internal evolution-strategy state, exposed to per-generation callbacks."""

    mean: np.ndarray
    covariance: np.ndarray
    step_size: float
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int
    pop_size: int
    rng_seed: int


def selection_weights(n_selected: int) -> np.ndarray:
    """Positive, strictly decreasing recombination weights summing to one."""
    w = np.log(n_selected + 0.5) - np.log(np.arange(1, n_selected + 1))
    return w / w.sum()


def _evaluate(f, X, vectorized):
    if vectorized:
        vals = np.asarray(f(X), dtype=float)
    else:
        vals = np.array([float(f(x)) for x in X])
    return np.where(np.isfinite(vals), vals, np.inf)


def _default_pop_size(n: int) -> int:
    return max(100, 10 * n)


def cmaes_minimize(f: Callable, x0, sigma0: float | None = None,
                   opts: OptimOptions | None = None,
                   callback: Callable | None = None) -> OptimResult:
    """Minimise ``f`` over R^n with the evolution strategy.

    Parameters
    ----------
    f : callable
        Objective; may return +inf as a worst-fitness sentinel.  With
        ``opts.vectorized`` it receives the whole (pop, n) sample at once.
    x0 : array
        Initial mean of the sampling distribution (must be finite).
    sigma0 : float, optional
        Initial step size.  Defaults to 0.3 times the median bound width
        when bounds are given, else 0.5.
    opts : OptimOptions, optional
    callback : callable, optional
        Invoked with the OptimState after every generation.
    """
    opts = opts or OptimOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    n = x0.size
    bounds = opts.bounds
    if sigma0 is None:
        if bounds is not None:
            widths = bounds[1] - bounds[0]
            finite = widths[np.isfinite(widths)]
            sigma0 = 0.3 * float(np.median(finite)) if finite.size else 0.5
        else:
            sigma0 = 0.5
    if sigma0 <= 0.0:
        raise ValueError("sigma0 must be positive")

    pop = opts.pop_size or _default_pop_size(n)
    mu = math.ceil(pop / 4)
    weights = selection_weights(mu)
    mueff = 1.0 / np.sum(weights**2)

    # standard learning rates as functions of n and mueff
    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    scales = np.ones(n) if opts.x_scales is None else np.asarray(opts.x_scales, dtype=float)
    if scales.size != n or np.any(scales <= 0.0):
        raise ValueError("x_scales must be positive and match the dimension")

    rng = np.random.default_rng(opts.seed)
    mean = x0.copy()
    if bounds is not None:
        mean = np.clip(mean, bounds[0], bounds[1])
    sigma = float(sigma0)
    C = np.diag(scales**2)
    ps = np.zeros(n)
    pc = np.zeros(n)

    max_iters = opts.max_iters if opts.max_iters is not None else 1000 * n
    best_x = mean.copy()
    best_f = math.inf
    evaluations = 0
    trace = []
    best_points = []
    recent_best = []
    reason = "max_iters"

    for gen in range(max_iters):
        # eigendecomposition with condition repair
        C = 0.5 * (C + C.T)
        eigvals, B = np.linalg.eigh(C)
        if eigvals[-1] <= 0.0:
            raise ValueError("covariance degenerated beyond repair")
        floor = eigvals[-1] / _MAX_CONDITION
        if eigvals[0] < floor:
            eigvals = np.maximum(eigvals, floor)
            C = (B * eigvals) @ B.T
        D = np.sqrt(eigvals)

        z = rng.standard_normal((pop, n))
        X = mean + sigma * (z * D) @ B.T
        if bounds is not None:
            lo, hi = bounds
            for _ in range(_BOUND_RESAMPLES):
                outside = np.any((X < lo) | (X > hi), axis=1)
                if not np.any(outside):
                    break
                k = int(np.count_nonzero(outside))
                z_new = rng.standard_normal((k, n))
                X[outside] = mean + sigma * (z_new * D) @ B.T
            np.clip(X, lo, hi, out=X)

        fvals = _evaluate(f, X, opts.vectorized)
        evaluations += pop
        order = np.argsort(fvals, kind="stable")
        gen_best_f = float(fvals[order[0]])
        gen_best_x = X[order[0]].copy()
        if gen_best_f < best_f:
            best_f = gen_best_f
            best_x = gen_best_x
        trace.append((gen, gen_best_f, float(np.median(fvals))))
        best_points.append(gen_best_x)

        selected = X[order[:mu]]
        x_old = mean
        mean = weights @ selected
        y_w = (mean - x_old) / sigma

        inv_sqrt = (B / D) @ B.T
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt @ y_w)
        hsig = (np.sum(ps**2) / n
                / (1.0 - (1.0 - cs) ** (2.0 * (gen + 1)))) < 2.0 + 4.0 / (n + 1.0)
        pc = (1.0 - cc) * pc + hsig * math.sqrt(cc * (2.0 - cc) * mueff) * y_w

        steps = (selected - x_old) / sigma
        c1a = c1 * (1.0 - (1.0 - float(hsig)) * cc * (2.0 - cc))
        C = ((1.0 - c1a - cmu) * C
             + c1 * np.outer(pc, pc)
             + cmu * (steps.T * weights) @ steps)
        sigma *= math.exp(min(1.0, (cs / damps) * (np.linalg.norm(ps) / chi_n - 1.0)))

        if callback is not None:
            callback(OptimState(mean=mean.copy(), covariance=C.copy(),
                                step_size=sigma, path_sigma=ps.copy(),
                                path_cov=pc.copy(), generation=gen,
                                pop_size=pop, rng_seed=opts.seed))

        recent_best.append(gen_best_f)
        if len(recent_best) > _TOL_WINDOW:
            recent_best.pop(0)
        if len(recent_best) == _TOL_WINDOW:
            finite = [v for v in recent_best if math.isfinite(v)]
            if finite and max(finite) - min(finite) < opts.tol_fun:
                reason = "tol_fun"
                break
        if sigma * math.sqrt(float(np.max(np.diag(C)))) < opts.tol_x:
            reason = "tol_x"
            break

    return OptimResult(best_point=best_x, best_value=best_f,
                       evaluations=evaluations, trace=trace,
                       termination_reason=reason,
                       best_points_per_generation=best_points)


# ---------------------------------------------------------------------------
# Nelder-Mead with box clipping
# ---------------------------------------------------------------------------

def _clip(x, bounds):
    if bounds is None:
        return x
    return np.clip(x, bounds[0], bounds[1])


def _initial_simplex(x0, bounds, step_frac=0.05, zero_step=0.00025):
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        delta = step_frac * abs(x0[i]) if x0[i] != 0.0 else zero_step
        simplex[i + 1, i] = x0[i] + delta
        simplex[i + 1] = _clip(simplex[i + 1], bounds)
        if simplex[i + 1, i] == x0[i]:
            simplex[i + 1, i] = x0[i] - delta
            simplex[i + 1] = _clip(simplex[i + 1], bounds)
    if any(simplex[i + 1, i] == x0[i] for i in range(n)):
        raise ValueError("degenerate initial simplex")
    return simplex


def nelder_mead_minimize(f: Callable, x0, opts: OptimOptions | None = None) -> OptimResult:
    """Simplex search with reflect/expand/contract/shrink and restarts.

    Bounds are honoured by clipping every trial vertex onto the box, so
    the objective is never evaluated outside it.  After the simplex
    collapses, the search restarts from the incumbent until the restart
    fails to improve by more than ``tol_fun``.
    """
    opts = opts or OptimOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    n = x0.size
    bounds = opts.bounds
    x0 = _clip(x0, bounds)
    max_iters = opts.max_iters if opts.max_iters is not None else 1000 * n

    evaluations = 0
    trace = []

    def eval_f(x):
        nonlocal evaluations
        evaluations += 1
        v = float(f(x))
        return v if math.isfinite(v) else math.inf

    best_x = x0.copy()
    best_f = eval_f(best_x)
    reason = "max_iters"
    iters = 0
    restart_f = math.inf

    while iters < max_iters:
        if math.isfinite(restart_f) and restart_f - best_f < opts.tol_fun:
            reason = "tol_fun"
            break
        restart_f = best_f
        simplex = _initial_simplex(best_x, bounds)
        fvals = np.array([best_f] + [eval_f(x) for x in simplex[1:]])

        while iters < max_iters:
            iters += 1
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            trace.append((iters, float(fvals[0]), float(np.median(fvals))))
            spread_f = fvals[-1] - fvals[0]
            spread_x = np.max(np.abs(simplex[1:] - simplex[0]))
            if spread_f < opts.tol_fun and spread_x < math.sqrt(opts.tol_x):
                break

            centroid = simplex[:-1].mean(axis=0)
            reflected = _clip(centroid + (centroid - simplex[-1]), bounds)
            f_r = eval_f(reflected)
            if f_r < fvals[0]:
                expanded = _clip(centroid + 2.0 * (centroid - simplex[-1]), bounds)
                f_e = eval_f(expanded)
                if f_e < f_r:
                    simplex[-1], fvals[-1] = expanded, f_e
                else:
                    simplex[-1], fvals[-1] = reflected, f_r
            elif f_r < fvals[-2]:
                simplex[-1], fvals[-1] = reflected, f_r
            else:
                if f_r < fvals[-1]:
                    contracted = _clip(centroid + 0.5 * (reflected - centroid), bounds)
                else:
                    contracted = _clip(centroid + 0.5 * (simplex[-1] - centroid), bounds)
                f_c = eval_f(contracted)
                if f_c < min(f_r, fvals[-1]):
                    simplex[-1], fvals[-1] = contracted, f_c
                else:
                    for i in range(1, n + 1):
                        simplex[i] = _clip(simplex[0] + 0.5 * (simplex[i] - simplex[0]), bounds)
                        fvals[i] = eval_f(simplex[i])

        order = np.argsort(fvals, kind="stable")
        if fvals[order[0]] < best_f:
            best_f = float(fvals[order[0]])
            best_x = simplex[order[0]].copy()

    return OptimResult(best_point=best_x, best_value=best_f,
                       evaluations=evaluations, trace=trace,
                       termination_reason=reason)
