"""Weight families, discretised functional evaluation, quadrature orders."""

from fractions import Fraction

import numpy as np
import pytest

from magnusdde import (
    ConfigurationError,
    DelayWindow,
    HistorySlice,
    custom_discretization,
    discretize,
    evaluate_discretized,
    point_delay_discretization,
    quadrature_error_order,
    trapezoid_half_interval_discretization,
)

POINT_WIN = DelayWindow(delta=1.0, epsilon=1.0)
HALF_WIN = DelayWindow(delta=1.0, epsilon=0.5)


def test_window_validation():
    with pytest.raises(ConfigurationError):
        DelayWindow(delta=0.0, epsilon=0.0)
    with pytest.raises(ConfigurationError):
        DelayWindow(delta=1.0, epsilon=1.5)
    with pytest.raises(ConfigurationError):
        DelayWindow(delta=1.0, epsilon=0.0)


def test_point_delay_weights():
    assert point_delay_discretization(POINT_WIN, 4).weights == (1.0,)
    assert point_delay_discretization(DelayWindow(2.0, 2.0), 8).weights == (1.0,)
    with pytest.raises(ConfigurationError):
        point_delay_discretization(HALF_WIN, 4)


def test_trapezoid_even_weights():
    assert trapezoid_half_interval_discretization(HALF_WIN, 4).weights == (0.25, 0.5, 0.25)
    d6 = trapezoid_half_interval_discretization(HALF_WIN, 6)
    assert np.allclose(d6.weights, (1 / 6, 1 / 3, 1 / 3, 1 / 6), rtol=0, atol=0)


def test_trapezoid_odd_weights():
    d3 = trapezoid_half_interval_discretization(HALF_WIN, 3)
    assert np.allclose(d3.weights, (1 / 3, 2 / 3), rtol=0, atol=0)
    with pytest.raises(ConfigurationError):
        trapezoid_half_interval_discretization(HALF_WIN, 1)
    with pytest.raises(ConfigurationError):
        trapezoid_half_interval_discretization(POINT_WIN, 4)


def test_weight_vector_length_matches_lag_floor():
    # length = floor((delta-eps)/tau) + 1
    for N in range(2, 30):
        disc = trapezoid_half_interval_discretization(HALF_WIN, N)
        assert len(disc.weights) == N // 2 + 1


def test_even_weights_sum_to_one_in_rationals():
    for N in range(2, 65, 2):
        disc = trapezoid_half_interval_discretization(HALF_WIN, N)
        assert sum(disc.exact_weights, Fraction(0)) == 1


def test_abs_weight_sum_bounded_by_one():
    for N in range(2, 65):
        disc = trapezoid_half_interval_discretization(HALF_WIN, N)
        assert disc.abs_weight_sum() <= 1.0 + 1e-15
    assert point_delay_discretization(POINT_WIN, 7).abs_weight_sum() == 1.0


def test_discretize_by_config_key():
    assert discretize(POINT_WIN, "point", 3).kind == "point"
    assert discretize(HALF_WIN, "trapezoid-half", 4).kind == "trapezoid-half"
    with pytest.raises(ConfigurationError):
        discretize(POINT_WIN, "nope", 3)


def test_custom_weights_and_bound():
    disc = custom_discretization(4, [0.5, 0.25, 0.25], abs_sum_bound=1.0)
    assert disc.kind == "custom"
    with pytest.raises(ConfigurationError):
        custom_discretization(4, [0.9, 0.9], abs_sum_bound=1.0)


def test_evaluate_point_returns_oldest_sample():
    disc = point_delay_discretization(POINT_WIN, 4)
    x = np.array([2.0, -1.0])
    out = evaluate_discretized(disc, HistorySlice([x]))
    assert np.array_equal(out, x)


def test_evaluate_constant_slice_is_identity():
    disc = trapezoid_half_interval_discretization(HALF_WIN, 4)
    x = np.array([3.0, 7.0])
    out = evaluate_discretized(disc, HistorySlice([x, x, x]))
    assert np.allclose(out, x, rtol=0, atol=0)


def test_evaluate_hand_computed_weighted_sum():
    disc = trapezoid_half_interval_discretization(HALF_WIN, 4)
    out = evaluate_discretized(disc, HistorySlice([0.0, 1.0, 2.0]))
    assert out[0] == 1.0


def test_evaluate_length_mismatch():
    disc = trapezoid_half_interval_discretization(HALF_WIN, 4)
    with pytest.raises(ConfigurationError):
        evaluate_discretized(disc, HistorySlice([1.0, 2.0]))


def test_evaluate_affine_in_slice():
    rng = np.random.default_rng(9)
    disc = trapezoid_half_interval_discretization(HALF_WIN, 8)
    k = disc.lag_count() + 1
    xi1 = [rng.standard_normal(4) for _ in range(k)]
    xi2 = [rng.standard_normal(4) for _ in range(k)]
    a, b = 1.7, -0.3
    lhs = evaluate_discretized(disc, HistorySlice([a * u + b * v for u, v in zip(xi1, xi2)]))
    rhs = (a * evaluate_discretized(disc, HistorySlice(xi1))
           + b * evaluate_discretized(disc, HistorySlice(xi2)))
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-14)


def test_evaluate_custom_pointwise_maps():
    disc = custom_discretization(2, [0.5, 0.5])
    disc = disc.__class__(N=2, weights=(0.5, 0.5), kind="custom",
                          maps=(None, lambda v: 2.0 * v))
    out = evaluate_discretized(disc, HistorySlice([np.array([1.0]), np.array([1.0])]))
    assert np.allclose(out, [1.5])


def test_convex_combination_stays_in_invariant_set():
    # nonnegative states with unit weighted mass; even-N trapezoid weights
    rng = np.random.default_rng(13)
    disc = trapezoid_half_interval_discretization(HALF_WIN, 8)
    k = disc.lag_count() + 1
    weights = np.full(6, 1.0 / 6.0)
    for _ in range(50):
        states = []
        for _ in range(k):
            v = rng.random(6)
            v /= np.dot(weights, v)
            states.append(v)
        out = evaluate_discretized(disc, HistorySlice(states))
        assert out.min() >= 0.0
        assert abs(np.dot(weights, out) - 1.0) <= 1e-12


def test_quadrature_constant_exact_for_even_N():
    errors, _ = quadrature_error_order(HALF_WIN, "trapezoid-half",
                                       lambda s: 5.0, 5.0, [4, 8, 16])
    assert errors == [0.0, 0.0, 0.0]


def test_quadrature_square_even_order_two():
    # exact integral (2/delta) * int_{-1}^{-1/2} s^2 ds = 7/12
    errors, orders = quadrature_error_order(HALF_WIN, "trapezoid-half",
                                            lambda s: s * s, 7.0 / 12.0,
                                            [4, 8, 16, 32])
    assert all(abs(p - 2.0) <= 0.1 for p in orders)
    # composite trapezoid on s^2 has error tau^2/6 exactly
    assert np.allclose(errors, [(1.0 / N) ** 2 / 6.0 for N in (4, 8, 16, 32)], rtol=1e-10)


def test_quadrature_square_odd_order_recorded():
    errors, orders = quadrature_error_order(HALF_WIN, "trapezoid-half",
                                            lambda s: s * s, 7.0 / 12.0,
                                            [3, 5, 9, 17, 33])
    # observed answer to the open question: the truncated odd rule is
    # also second order (the doubled last weight acts as a one-strip
    # left-rectangle patch with O(tau^2) error)
    assert all(1.8 <= p <= 2.2 for p in orders[1:])
    assert errors[0] > errors[-1]
