import numpy as np
import pytest

from dynqr.core import CoefficientSet, QuantileGrid, crossing_distance
from dynqr.scoring import (WEIGHT_SCHEMES, coefficient_bias, crossing_incidence,
                           quantile_score, qwcrps, rearrange, scheme_weights,
                           score_forecasts)


# ---------------------------------------------------------------------------
# coefficient bias
# ---------------------------------------------------------------------------

def _coeffs(beta, theta=None):
    return CoefficientSet(beta=np.asarray(beta, dtype=float),
                          theta=np.asarray(theta, dtype=float) if theta is not None
                          else np.empty((len(beta), 0)))


def test_bias_zero_when_exact():
    grid = QuantileGrid([0.5])
    truth = _coeffs([[1.0, 2.0]], [[0.3]])
    assert coefficient_bias([truth], [truth], grid, 0.5) == 0.0


def test_bias_single_offset_coefficient():
    grid = QuantileGrid([0.5])
    est = _coeffs([[1.3]])
    tru = _coeffs([[1.0]])
    assert coefficient_bias([est], [tru], grid, 0.5) == pytest.approx(0.3)


def test_bias_averages_replications():
    grid = QuantileGrid([0.25, 0.75])
    tru = _coeffs([[0.0, 0.0], [0.0, 0.0]])
    est1 = _coeffs([[0.2, 0.2], [9.0, 9.0]])      # rep MAD at tau=0.25: 0.2
    est2 = _coeffs([[0.4, 0.4], [9.0, 9.0]])      # rep MAD at tau=0.25: 0.4
    assert coefficient_bias([est1, est2], [tru, tru], grid, 0.25) == pytest.approx(0.3)


def test_bias_includes_inertia_only_when_estimated():
    grid = QuantileGrid([0.5])
    tru = _coeffs([[0.0]], [[0.0]])
    est_static = _coeffs([[0.3]])
    est_dynamic = _coeffs([[0.3]], [[0.9]])
    assert coefficient_bias([est_static], [tru], grid, 0.5) == pytest.approx(0.3)
    assert coefficient_bias([est_dynamic], [tru], grid, 0.5) == pytest.approx(0.6)


def test_bias_dimension_mismatch():
    grid = QuantileGrid([0.5])
    with pytest.raises(ValueError):
        coefficient_bias([_coeffs([[1.0]])], [_coeffs([[1.0, 2.0]])], grid, 0.5)
    with pytest.raises(ValueError):
        coefficient_bias([], [], grid, 0.5)


# ---------------------------------------------------------------------------
# crossing incidence and rearrangement
# ---------------------------------------------------------------------------

def test_incidence_zero_on_monotone():
    values = np.sort(np.random.default_rng(0).normal(size=(10, 4)), axis=1)
    assert crossing_incidence(values) == 0.0


def test_incidence_full_swap():
    assert crossing_incidence(np.array([[2.0, 1.0]])) == 100.0


def test_incidence_single_adjacent_swap():
    values = np.array([[1.0, 3.0, 2.0],
                       [1.0, 2.0, 3.0]])
    assert crossing_incidence(values) == pytest.approx(100.0 * 2 / 6)


def test_incidence_matches_crossing_distance_zero_set():
    rng = np.random.default_rng(1)
    for _ in range(200):
        values = rng.normal(size=(3, 4))
        assert (crossing_incidence(values) == 0.0) == (crossing_distance(values) == 0.0)


def test_rearrange_sorts_and_preserves_multiset():
    assert np.array_equal(rearrange([1.0, 3.0, 2.0]), [1.0, 2.0, 3.0])
    assert np.array_equal(rearrange([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    assert np.array_equal(rearrange([5.0, 5.0, 5.0]), [5.0, 5.0, 5.0])
    rng = np.random.default_rng(2)
    vecs = rng.normal(size=(20, 6))
    out = rearrange(vecs)
    for a, b in zip(vecs, out):
        assert sorted(a) == list(b)


# ---------------------------------------------------------------------------
# quantile score and qwCRPS
# ---------------------------------------------------------------------------

def test_quantile_score_values():
    assert quantile_score(1.0, 1.0, 0.4) == 0.0
    assert quantile_score(0.0, 1.0, 0.5) == pytest.approx(1.0)
    assert quantile_score(1.0, 0.0, 0.9) == pytest.approx(1.8)


def test_quantile_score_nonnegative():
    rng = np.random.default_rng(3)
    y, q = rng.normal(size=(2, 300))
    tau = rng.uniform(0.01, 0.99, size=300)
    assert np.all(quantile_score(y, q, tau) >= 0.0)


def test_scheme_weights_shapes():
    grid = QuantileGrid([0.1, 0.5, 0.9])
    assert np.allclose(scheme_weights(grid.levels, "uniform"), 1.0 / 3)
    assert np.allclose(scheme_weights(grid.levels, "centre"),
                       [0.1 * 0.9, 0.25, 0.9 * 0.1])
    assert np.allclose(scheme_weights(grid.levels, "left_tail"),
                       [0.81, 0.25, 0.01])
    assert np.allclose(scheme_weights(grid.levels, "right_tail"),
                       [0.01, 0.25, 0.81])
    with pytest.raises(ValueError):
        scheme_weights(grid.levels, "middle_out")


def test_qwcrps_perfect_forecast_is_zero():
    grid = QuantileGrid([0.2, 0.5, 0.8])
    y = np.array([1.0, -2.0])
    forecasts = np.tile(y[:, None], (1, 3))
    for scheme in WEIGHT_SCHEMES:
        assert qwcrps(forecasts, y, grid, scheme) == 0.0


def test_qwcrps_uniform_equals_mean_quantile_score():
    rng = np.random.default_rng(4)
    grid = QuantileGrid([0.25, 0.5, 0.75])
    forecasts = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    qs = quantile_score(y[:, None], forecasts, grid.levels)
    assert qwcrps(forecasts, y, grid, "uniform") == pytest.approx(qs.mean(axis=1).mean())


def test_qwcrps_hand_computed_centre_case():
    grid = QuantileGrid([0.25, 0.75])
    y = np.array([0.0])
    forecasts = np.array([[1.0, 2.0]])
    qs1 = 2.0 * (1.0 - 0.25) * 1.0       # y <= q
    qs2 = 2.0 * (1.0 - 0.75) * 2.0
    expected = 0.25 * 0.75 * qs1 + 0.75 * 0.25 * qs2
    assert qwcrps(forecasts, y, grid, "centre") == pytest.approx(expected)


def test_qwcrps_invariant_to_observation_order():
    rng = np.random.default_rng(5)
    grid = QuantileGrid([0.1, 0.5, 0.9])
    forecasts = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    perm = rng.permutation(25)
    assert qwcrps(forecasts, y, grid) == pytest.approx(
        qwcrps(forecasts[perm], y[perm], grid))


def test_qwcrps_positively_homogeneous():
    rng = np.random.default_rng(6)
    grid = QuantileGrid([0.3, 0.7])
    forecasts = rng.normal(size=(15, 2))
    y = rng.normal(size=15)
    base = qwcrps(forecasts, y, grid)
    assert qwcrps(2.5 * forecasts, 2.5 * y, grid) == pytest.approx(2.5 * base)


def test_qwcrps_dimension_mismatch():
    grid = QuantileGrid([0.5])
    with pytest.raises(ValueError):
        qwcrps(np.ones((3, 2)), np.ones(3), grid)


def test_rearrangement_never_hurts_uniform_score():
    rng = np.random.default_rng(7)
    grid = QuantileGrid([0.1, 0.3, 0.5, 0.7, 0.9])
    for _ in range(100):
        forecasts = rng.normal(size=(10, 5)) * 2.0
        y = rng.normal(size=10)
        unsorted = qwcrps(forecasts, y, grid, "uniform")
        sorted_ = qwcrps(rearrange(forecasts), y, grid, "uniform")
        assert sorted_ <= unsorted + 1e-12


def test_score_forecasts_report():
    rng = np.random.default_rng(8)
    grid = QuantileGrid([0.2, 0.5, 0.8])
    forecasts = rng.normal(size=(12, 3))
    y = rng.normal(size=12)
    rep_u = score_forecasts(forecasts, y, grid, sort=False)
    rep_s = score_forecasts(forecasts, y, grid, sort=True)
    assert set(rep_u.qwcrps_by_scheme) == set(WEIGHT_SCHEMES)
    assert rep_u.qs_total == rep_u.qwcrps_by_scheme["uniform"]
    assert rep_s.sorted_variant and not rep_u.sorted_variant
    assert rep_s.qwcrps_by_scheme["uniform"] <= rep_u.qwcrps_by_scheme["uniform"]
    assert all(v >= 0.0 for v in rep_u.qwcrps_by_scheme.values())
    assert rep_u.per_observation.shape == (12,)
