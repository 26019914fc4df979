"""Delay functionals and their grid discretisations.

A delay functional maps a history segment xi: [-delta, 0] -> X to an element
of X, using only the restriction to [-delta, -epsilon]. On the integrator
grid tau = delta/N it is replaced by a weighted sum

    sum_l kappa_l * F_l(xi(-delta + l*tau)),   l = 0 .. floor((delta-eps)/tau)

with pointwise maps F_l (identity for every built-in family). Two families
are provided: evaluation at -delta ("point") and the normalised integral
over [-delta, -delta/2] via the composite trapezoidal rule
("trapezoid-half", with the truncated odd-N variant).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "DelayWindow",
    "DelayDiscretization",
    "HistorySlice",
    "point_delay_discretization",
    "trapezoid_half_interval_discretization",
    "custom_discretization",
    "discretize",
    "evaluate_discretized",
    "quadrature_error_order",
]


@dataclass(frozen=True)
class DelayWindow:
    """Delay interval [epsilon, delta] into the past, 0 < epsilon <= delta."""

    delta: float
    epsilon: float

    def __post_init__(self):
        if not (self.delta > 0.0):
            raise ConfigurationError("delta must be positive")
        if not (0.0 < self.epsilon <= self.delta):
            raise ConfigurationError("epsilon must lie in (0, delta]")

    def eps_ratio(self):
        """epsilon/delta as an exact rational (built-in families only)."""
        r = Fraction(self.epsilon / self.delta).limit_denominator(10**6)
        if abs(float(r) - self.epsilon / self.delta) > 1e-12:
            raise ConfigurationError("epsilon/delta is not a simple rational")
        return r


@dataclass(frozen=True)
class DelayDiscretization:
    """Weight family kappa_l (and identity pointwise maps) for one grid.

    lag_count() == floor((delta-eps)/tau) is derived from the weight vector
    length; exact weights are kept alongside the float ones so weight-sum
    identities can be checked in rational arithmetic.
    """

    N: int
    weights: tuple
    exact_weights: tuple = None
    kind: str = "custom"
    maps: tuple = None  # one callable per lag; None means identity for all

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("N must be a positive integer")
        if len(self.weights) == 0:
            raise ConfigurationError("weight vector must be nonempty")
        if self.maps is not None and len(self.maps) != len(self.weights):
            raise ConfigurationError("maps length must match weights length")
        object.__setattr__(self, "weights_array",
                           np.asarray(self.weights, dtype=np.float64))

    def lag_count(self):
        return len(self.weights) - 1

    def abs_weight_sum(self):
        return float(sum(abs(w) for w in self.weights))


@dataclass
class HistorySlice:
    """Samples xi(-delta + l*tau), l = 0 .. lag_count, oldest first."""

    values: list

    def __len__(self):
        return len(self.values)


def point_delay_discretization(window: DelayWindow, N: int) -> DelayDiscretization:
    """Point delay: the functional only reads xi(-delta), so kappa_0 = 1."""
    if window.epsilon != window.delta:
        raise ConfigurationError("point delay requires epsilon == delta")
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    return DelayDiscretization(N=N, weights=(1.0,), exact_weights=(Fraction(1),), kind="point")


def trapezoid_half_interval_discretization(window: DelayWindow, N: int) -> DelayDiscretization:
    """Composite trapezoidal weights for (2/delta) * integral over [-delta, -delta/2].

    Even N: nodes l = 0..N/2 with kappa_0 = kappa_{N/2} = 1/N and 2/N between
    (sums to exactly 1). Odd N: the endpoint -delta/2 is off-grid, so the rule
    is truncated at l = (N-1)/2 with kappa_0 = 1/N and 2/N elsewhere; the
    omitted strip is covered by the doubled last weight (still second order).
    """
    if 2 * window.epsilon != window.delta:
        raise ConfigurationError("trapezoid-half requires epsilon == delta/2")
    if N < 2:
        raise ConfigurationError("trapezoid-half requires N >= 2")
    if N % 2 == 0:
        exact = [Fraction(2, N)] * (N // 2 + 1)
        exact[0] = exact[-1] = Fraction(1, N)
    else:
        exact = [Fraction(2, N)] * ((N - 1) // 2 + 1)
        exact[0] = Fraction(1, N)
    return DelayDiscretization(
        N=N,
        weights=tuple(float(w) for w in exact),
        exact_weights=tuple(exact),
        kind="trapezoid-half",
    )


def custom_discretization(N, weights, abs_sum_bound=None):
    """User-supplied weight vector (experimentation hook).

    The uniform-in-tau bound sum |kappa_l| <= L is enforced when a bound is
    given; built-in families satisfy L = 1.
    """
    weights = tuple(float(w) for w in weights)
    disc = DelayDiscretization(N=N, weights=weights, kind="custom")
    if abs_sum_bound is not None and disc.abs_weight_sum() > abs_sum_bound + 1e-12:
        raise ConfigurationError(
            "sum of |weights| = %.6f exceeds the configured bound %.6f"
            % (disc.abs_weight_sum(), abs_sum_bound))
    return disc


_FAMILIES = {
    "point": point_delay_discretization,
    "trapezoid-half": trapezoid_half_interval_discretization,
}


def discretize(window: DelayWindow, mode: str, N: int) -> DelayDiscretization:
    """Build the weight family selected by config key."""
    try:
        builder = _FAMILIES[mode]
    except KeyError:
        raise ConfigurationError(
            "unknown delay mode %r (expected one of %s)" % (mode, sorted(_FAMILIES)))
    return builder(window, N)


def evaluate_discretized(disc: DelayDiscretization, slice_: HistorySlice):
    """sum_l kappa_l F_l(xi_l) over the slice, oldest sample first.

    With identity maps the sum is one fixed dot-product kernel over the
    stacked samples, so results are bit-reproducible for a given machine and
    shape; custom pointwise maps fall back to an explicit left-to-right loop.
    """
    if len(slice_) != len(disc.weights):
        raise ConfigurationError(
            "history slice length %d != weight count %d" % (len(slice_), len(disc.weights)))
    if disc.maps is None:
        stacked = np.stack([np.atleast_1d(np.asarray(v, dtype=np.float64))
                            for v in slice_.values])
        return np.dot(disc.weights_array, stacked)
    acc = None
    for l, (w, v) in enumerate(zip(disc.weights, slice_.values)):
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        if disc.maps[l] is not None:
            v = np.asarray(disc.maps[l](v), dtype=np.float64)
        term = w * v
        acc = term if acc is None else acc + term
    return acc


def quadrature_error_order(window, mode, xi, exact_value, N_values):
    """Observed convergence order of F_tau against the exact functional value.

    xi is a scalar (or vector-valued) callable on [-delta, 0]; exact_value is
    the analytically known F(xi). Returns (errors, orders), where orders[i]
    compares N_values[i] to N_values[i+1] (log-ratio of errors over log-ratio
    of N). For doubling sequences these are plain log2 ratios.
    """
    errors = []
    for N in N_values:
        disc = discretize(window, mode, N)
        tau = window.delta / N
        vals = [np.asarray(xi(-window.delta + l * tau), dtype=np.float64)
                for l in range(disc.lag_count() + 1)]
        approx = evaluate_discretized(disc, HistorySlice(vals))
        errors.append(float(np.max(np.abs(approx - exact_value))))
    orders = []
    for i in range(len(errors) - 1):
        if errors[i] == 0.0 or errors[i + 1] == 0.0:
            orders.append(float("nan"))
        else:
            orders.append(np.log(errors[i] / errors[i + 1]) / np.log(N_values[i + 1] / N_values[i]))
    return errors, orders
