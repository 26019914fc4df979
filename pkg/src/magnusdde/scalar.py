"""Scalar toy problem u'(t) = -F(u restricted to the past) * u(t).

This is the one-dimensional instance used throughout verification: the
generator is multiplication by -w, the delay functional is either evaluation
at -delta or the normalised integral over [-delta, -delta/2]. Closed-form
constructions for initial histories satisfying the t=0 compatibility
conditions live here, as does the independent method-of-steps reference
solver used to cross-validate fine-grid trajectories.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .delay import DelayWindow
from .errors import ConfigurationError
from .integrator import AnalyticHistory, GeneratorSpec, ProblemSpec
from .operators import SparseOperator

__all__ = [
    "window_for",
    "make_scalar_problem",
    "functional_moments",
    "constant_history",
    "compatible_polynomial_history",
    "exponential_history",
    "method_of_steps",
]


def window_for(delta, mode):
    if mode == "point":
        return DelayWindow(delta=delta, epsilon=delta)
    if mode == "trapezoid-half":
        return DelayWindow(delta=delta, epsilon=delta / 2.0)
    raise ConfigurationError("unsupported scalar delay mode %r" % (mode,))


def _q_tilde(w):
    return SparseOperator(1, [0], [0], [-float(np.asarray(w).ravel()[0])])


def make_scalar_problem(delta, mode, history, horizon,
                        epsilon=None, weights=None) -> ProblemSpec:
    """Scalar problem with a built-in delay family, or mode="custom" with an
    explicit weight vector over lags 0..len-1 and a matching epsilon."""
    gen = GeneratorSpec(dim=1, q_tilde=_q_tilde, q0=None)
    if mode == "custom":
        if weights is None or epsilon is None:
            raise ConfigurationError("custom mode needs weights and epsilon")
        window = DelayWindow(delta=delta, epsilon=epsilon)
        lag_count = len(weights) - 1

        def delay_mode(win, N, _w=tuple(float(v) for v in weights)):
            from .delay import custom_discretization
            expected = int(np.floor((win.delta - win.epsilon) * N / win.delta + 1e-9))
            if lag_count != expected:
                raise ConfigurationError(
                    "custom weight vector has %d lags but N=%d implies %d"
                    % (lag_count, N, expected))
            return custom_discretization(N, _w)
    else:
        window = window_for(delta, mode)
        delay_mode = mode
    return ProblemSpec(
        generator=gen,
        window=window,
        delay_mode=delay_mode,
        history=history,
        horizon=horizon,
        name="scalar-%s" % mode,
    )


def constant_history(value):
    v = float(value)
    return AnalyticHistory(lambda s: np.array([v]),
                           dphi=lambda s: np.array([0.0]),
                           d2phi=lambda s: np.array([0.0]))


def functional_moments(window: DelayWindow, mode):
    """F applied to the monomials 1, s, s^2, s^3 on [-delta, 0].

    point: evaluation at -delta. trapezoid-half: (2/delta) * integral over
    [-delta, -delta/2], computed analytically.
    """
    d = window.delta
    if mode == "point":
        return (1.0, -d, d * d, -d ** 3)
    if mode == "trapezoid-half":
        # (2/d) * int_{-d}^{-d/2} s^k ds
        return (1.0, -0.75 * d, (7.0 / 12.0) * d * d, -(15.0 / 32.0) * d ** 3)
    raise ConfigurationError("no moments for mode %r" % (mode,))


def _poly_history(coeffs):
    a, b, c, d = coeffs
    phi = lambda s: np.array([a + b * s + c * s * s + d * s ** 3])
    dphi = lambda s: np.array([b + 2 * c * s + 3 * d * s * s])
    d2phi = lambda s: np.array([2 * c + 6 * d * s])
    h = AnalyticHistory(phi, dphi, d2phi)
    h.coefficients = (a, b, c, d)
    return h


def _real_roots(poly_coeffs):
    roots = np.roots(poly_coeffs)
    return sorted((r.real for r in roots if abs(r.imag) <= 1e-10 * max(1.0, abs(r))),
                  key=abs)


def compatible_polynomial_history(window: DelayWindow, mode, value_at_zero=1.0):
    """Polynomial history satisfying both compatibility conditions at t = 0.

    Tries a quadratic a + b s + c s^2 first; when the reduced equation for b
    has no real root (which happens for the half-interval integral
    functional), falls back to a cubic and fixes the spare degree of freedom
    by minimising |cubic coefficient|. All algebra is over the continuous
    functional's monomial moments, so the residuals vanish analytically.
    """
    a = float(value_at_zero)
    if a == 0.0:
        raise ConfigurationError("value_at_zero must be nonzero")
    mu = functional_moments(window, mode)

    # quadratic attempt: the first condition pins c given b, the second
    # becomes a quadratic in b
    def c_quad(b):
        return -(b * (1.0 + a * mu[1]) + mu[0] * a * a) / (a * mu[2])

    def g_quad(b):
        c = c_quad(b)
        Fdphi = mu[0] * b + 2.0 * mu[1] * c
        return 2.0 * c - (-(Fdphi) * a + (b / a) ** 2 * a)

    bs = np.array([0.0, 1.0, 2.0])
    quad_coeffs = np.polyfit(bs, [g_quad(b) for b in bs], 2)
    roots = _real_roots(quad_coeffs)
    if roots:
        b = roots[0]
        return _poly_history((a, b, c_quad(b), 0.0))

    # cubic fallback: for a given b, both conditions are linear in (c, d)
    def solve_cd(b):
        M = np.array([[a * mu[2], a * mu[3]],
                      [2.0 + 2.0 * a * mu[1], 3.0 * a * mu[2]]])
        rhs = np.array([-mu[0] * a * a - b * (1.0 + a * mu[1]),
                        b * b / a - a * mu[0] * b])
        return np.linalg.solve(M, rhs)

    d_coeffs = np.polyfit(bs, [solve_cd(b)[1] for b in bs], 2)
    d_roots = _real_roots(d_coeffs)
    if d_roots:
        b = d_roots[0]
    elif abs(d_coeffs[0]) > 1e-14:
        b = -d_coeffs[1] / (2.0 * d_coeffs[0])  # vertex: smallest |d| attainable
    else:
        b = 0.0
    c, d = solve_cd(b)
    return _poly_history((a, b, c, d))


def exponential_history(window: DelayWindow, psi):
    """Decaying exponential history psi * exp(-psi (s + delta)), point delay.

    Satisfies the first compatibility condition exactly by construction
    (phi'(0) = -phi(-delta) phi(0)); the second-order condition does not hold
    for this shape, which makes it a useful half-compatible test input.
    """
    q = float(psi)
    d = window.delta
    phi = lambda s: np.array([q * math.exp(-q * (s + d))])
    dphi = lambda s: np.array([-q * q * math.exp(-q * (s + d))])
    d2phi = lambda s: np.array([q ** 3 * math.exp(-q * (s + d))])
    return AnalyticHistory(phi, dphi, d2phi)


class _Segments:
    """Dense piecewise representation with per-window splines.

    Windows are glued only through their endpoint values, so derivative
    kinks at window joints never leak into neighbouring interpolants.
    """

    def __init__(self):
        self.pieces = []  # (t0, t1, spline)
        self.cum = []     # integral of u from the global start to t0

    def append(self, t, u):
        spline = CubicSpline(t, u)
        if not self.pieces:
            self.cum.append(0.0)
        else:
            prev_t0, prev_t1, prev_s = self.pieces[-1]
            self.cum.append(self.cum[-1] + float(prev_s.integrate(prev_t0, prev_t1)))
        self.pieces.append((t[0], t[-1], spline))

    def _locate(self, t):
        for i in range(len(self.pieces) - 1, -1, -1):
            t0, t1, _ = self.pieces[i]
            if t >= t0 - 1e-12:
                return i
        raise ConfigurationError("time %g precedes the stored segments" % t)

    def value(self, t):
        i = self._locate(t)
        return float(self.pieces[i][2](min(t, self.pieces[i][1])))

    def integral_from_start(self, t):
        i = self._locate(t)
        t0, t1, s = self.pieces[i]
        return self.cum[i] + float(s.integrate(t0, min(t, t1)))


def method_of_steps(window: DelayWindow, mode, history: AnalyticHistory, horizon,
                    pts_per_window=4096):
    """High-accuracy reference for the scalar problem, independent of the
    exponential stepper.

    Advances window by window (window length = the minimum delay), where the
    delayed coefficient only involves already-known data, and integrates the
    exact step formula u(t) = u(t0) exp(-int_{t0}^t F(.u) ) with spline
    antiderivatives on a dense grid. Returns a callable evaluating u(t).
    """
    eps = window.epsilon
    delta = window.delta
    segs = _Segments()
    s_hist = np.linspace(-delta, 0.0, pts_per_window + 1)
    segs.append(s_hist, np.array([float(history.value(s)[0]) for s in s_hist]))
    t0 = 0.0
    while t0 < horizon - 1e-12:
        t1 = min(t0 + eps, horizon)
        tw = np.linspace(t0, t1, pts_per_window + 1)
        if mode == "point":
            f = np.array([segs.value(t - delta) for t in tw])
        elif mode == "trapezoid-half":
            f = np.array([
                (2.0 / delta) * (segs.integral_from_start(t - delta / 2.0)
                                 - segs.integral_from_start(t - delta))
                for t in tw])
        else:
            raise ConfigurationError("method of steps supports point and trapezoid-half")
        Fint = CubicSpline(tw, f).antiderivative()
        u0 = segs.value(t0)
        uw = u0 * np.exp(-(Fint(tw) - Fint(t0)))
        segs.append(tw, uw)
        t0 = t1
    return segs.value
