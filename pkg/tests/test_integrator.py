"""Stepper mechanics: seeding, half/full steps, guards, compatibility."""

import math

import numpy as np
import pytest

from magnusdde import (
    AnalyticHistory,
    ConfigurationError,
    ExpmConfig,
    GeneratorSpec,
    GuardViolationError,
    InvariantGuard,
    ProblemSpec,
    SparseOperator,
    TabulatedHistory,
    compatible_polynomial_history,
    constant_history,
    exponential_history,
    full_step,
    half_step,
    make_scalar_problem,
    run,
    seed_history,
    validate_history_compatibility,
)
from magnusdde.delay import DelayWindow

from oracles import dense_expm

E = math.e


def scalar_problem(mode="point", history=None, horizon=2.0, delta=1.0):
    history = history or constant_history(1.0)
    return make_scalar_problem(delta, mode, history, horizon)


# ---------------------------------------------------------------- seeding

def test_seed_constant_history_both_modes():
    prob = scalar_problem()
    for mode in ("exact", "averaged"):
        store = seed_history(prob, 4, mode)
        for n in range(4):
            assert store.get_half(n)[0] == 1.0
        for n in range(-4, 1):
            assert store.get_full(n)[0] == 1.0


def test_seed_exact_linear_history():
    hist = AnalyticHistory(lambda s: np.array([s]))
    prob = scalar_problem(history=hist)
    store = seed_history(prob, 2, "exact")
    assert store.get_half(0)[0] == -0.75  # phi((0+1/2)*0.5 - 1)


def test_seed_averaged_quadratic_history():
    hist = AnalyticHistory(lambda s: np.array([s * s]))
    prob = scalar_problem(history=hist)
    store = seed_history(prob, 2, "averaged")
    # (phi(-1) + phi(-0.5)) / 2 = 0.625; exact sample would be 0.5625
    assert store.get_half(0)[0] == 0.625
    exact = seed_history(prob, 2, "exact").get_half(0)[0]
    assert abs(store.get_half(0)[0] - exact) == 0.0625  # = |phi''| / 4 * tau^2


def test_seed_rejects_tabulated_in_exact_mode():
    hist = TabulatedHistory([np.array([1.0])] * 3)
    prob = scalar_problem(history=hist)
    with pytest.raises(ConfigurationError):
        seed_history(prob, 2, "exact")
    store = seed_history(prob, 2, "averaged")
    assert store.get_half(1)[0] == 1.0


def test_seed_rejects_wrong_tabulated_length():
    hist = TabulatedHistory([np.array([1.0])] * 3)
    prob = scalar_problem(history=hist)
    with pytest.raises(ConfigurationError):
        seed_history(prob, 4, "averaged")


# ---------------------------------------------------------------- half steps

def test_half_step_zero_generator_is_shift():
    gen = GeneratorSpec(dim=1, q_tilde=lambda w: SparseOperator.zero(1))
    hist = AnalyticHistory(lambda s: np.array([1.0 + s]))
    prob = ProblemSpec(generator=gen, window=DelayWindow(1.0, 1.0), delay_mode="point",
                       history=hist, horizon=2.0)
    disc = prob.discretize(2)
    store = seed_history(prob, 2, "exact")
    full_step(store, prob, disc, 0)
    full_step(store, prob, disc, 1)
    assert half_step(store, prob, disc, 2)[0] == store.get_full(0)[0]


def test_half_step_hand_recursion():
    prob = scalar_problem()
    disc = prob.discretize(1)
    store = seed_history(prob, 1, "exact")
    full_step(store, prob, disc, 0)
    got = half_step(store, prob, disc, 1)
    assert got[0] == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_half_step_memoised_bit_identical():
    prob = scalar_problem()
    disc = prob.discretize(1)
    store = seed_history(prob, 1, "exact")
    full_step(store, prob, disc, 0)
    a = half_step(store, prob, disc, 1)
    b = half_step(store, prob, disc, 1)
    assert a[0] == b[0]


# ---------------------------------------------------------------- full steps

def test_full_step_hand_recursion_N1():
    prob = scalar_problem()
    disc = prob.discretize(1)
    store = seed_history(prob, 1, "exact")
    u1 = full_step(store, prob, disc, 0)
    assert u1[0] == pytest.approx(math.exp(-1.0), rel=1e-15)


def test_full_step_hand_recursion_N2():
    prob = scalar_problem(horizon=1.0)
    res = run(prob, 2)
    vals = [s[0] for s in res.states]
    assert vals[0] == 1.0
    assert vals[1] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert vals[2] == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_run_zero_horizon():
    prob = scalar_problem(horizon=0.0)
    res = run(prob, 4)
    assert len(res.states) == 1
    assert res.states[0][0] == 1.0
    assert res.report.steps == 0


def test_run_matches_manual_stepping_bitwise():
    hist = compatible_polynomial_history(DelayWindow(1.0, 0.5), "trapezoid-half")
    prob = scalar_problem("trapezoid-half", hist, horizon=1.0)
    res = run(prob, 8)
    disc = prob.discretize(8)
    store = seed_history(prob, 8, "exact")
    for n in range(8):
        full_step(store, prob, disc, n)
    for n in range(9):
        assert res.store.get_full(n)[0] == store.get_full(n)[0]


def test_degenerate_autonomy_matches_single_exponential():
    rng = np.random.default_rng(17)
    from oracles import random_metzler
    M = random_metzler(rng, 6, scale=0.4)
    A = SparseOperator.from_dense(M)
    gen = GeneratorSpec(dim=6, q_tilde=lambda w: A)
    x0 = rng.random(6) + 0.5
    hist = AnalyticHistory(lambda s: x0)
    prob = ProblemSpec(generator=gen, window=DelayWindow(1.0, 1.0), delay_mode="point",
                       history=hist, horizon=2.0)
    res = run(prob, 10, expm_cfg=ExpmConfig(tol=1e-12))
    for k, t in enumerate(res.times):
        want = dense_expm(M, t).dot(x0)
        assert np.linalg.norm(res.states[k] - want) <= 1e-9 * np.linalg.norm(want)


# ---------------------------------------------------------------- causality

def test_access_log_no_read_before_write():
    hist = compatible_polynomial_history(DelayWindow(1.0, 0.5), "trapezoid-half")
    prob = scalar_problem("trapezoid-half", hist, horizon=2.0)
    res = run(prob, 8, track_access=True)
    written = set()
    for op, kind, n in res.store.access_log:
        if op == "w":
            written.add((kind, n))
        else:
            assert (kind, n) in written, "read of %s[%d] before write" % (kind, n)


def test_history_lookback_bounded_by_2N():
    prob = scalar_problem(horizon=2.0)
    res = run(prob, 4, track_access=True)
    for op, kind, n in res.store.access_log:
        if op == "r" and kind == "full":
            assert n >= -4  # never beyond u_{-N}


# ---------------------------------------------------------------- guards

def test_guard_abort_reports_step_and_component():
    hist = AnalyticHistory(lambda s: np.array([-1.0]))
    prob = scalar_problem(history=hist)
    guard = InvariantGuard(predicate="nonnegative", tolerance=1e-9, action="abort")
    with pytest.raises(GuardViolationError) as err:
        run(prob, 2, guard=guard)
    assert err.value.step == 0
    assert err.value.component == 0


def test_guard_record_counts_without_abort():
    hist = AnalyticHistory(lambda s: np.array([-1.0]))
    prob = scalar_problem(history=hist)
    guard = InvariantGuard(predicate="nonnegative", tolerance=1e-9, action="record")
    res = run(prob, 2)
    assert res.report.guard_violations == 0
    res = run(prob, 2, guard=guard)
    assert res.report.guard_violations > 0


def test_guard_validation():
    with pytest.raises(ConfigurationError):
        InvariantGuard(predicate="bogus")
    with pytest.raises(ConfigurationError):
        InvariantGuard(tolerance=-1.0)
    with pytest.raises(ConfigurationError):
        InvariantGuard(action="explode")


# ---------------------------------------------------------------- compatibility

def test_residuals_zero_for_zero_generator():
    gen = GeneratorSpec(dim=1, q_tilde=lambda w: SparseOperator.zero(1))
    prob = ProblemSpec(generator=gen, window=DelayWindow(1.0, 1.0), delay_mode="point",
                       history=constant_history(3.0), horizon=1.0)
    rep = validate_history_compatibility(prob, 8)
    assert rep["r1"] == 0.0 and rep["r2"] == 0.0
    assert rep["r1_ok"] and rep["r2_ok"]


def test_residuals_zero_for_compatible_polynomial_point():
    win = DelayWindow(1.0, 1.0)
    hist = compatible_polynomial_history(win, "point")
    assert hist.coefficients == pytest.approx((1.0, 0.0, -1.0, 0.0), abs=1e-12)
    prob = scalar_problem(history=hist)
    rep = validate_history_compatibility(prob, 16)
    assert rep["r1"] <= 1e-12
    assert rep["r2"] <= 1e-12


def test_residual_r1_zero_for_exponential_history():
    win = DelayWindow(1.0, 1.0)
    prob = scalar_problem(history=exponential_history(win, 1.3))
    rep = validate_history_compatibility(prob, 16)
    assert rep["r1"] <= 1e-13
    assert rep["r2"] > 1e-3  # second condition genuinely fails for this shape


def test_residual_positive_for_incompatible_history():
    prob = scalar_problem()  # constant 1 with nonzero generator violates C1
    rep = validate_history_compatibility(prob, 8)
    assert rep["r1"] == pytest.approx(1.0, rel=1e-12)
    assert not rep["r1_ok"]
    run(prob, 8)  # still allowed to run


def test_residuals_require_analytic_derivatives():
    hist = AnalyticHistory(lambda s: np.array([1.0]))  # no dphi/d2phi
    prob = scalar_problem(history=hist)
    with pytest.raises(ConfigurationError):
        validate_history_compatibility(prob, 8)
    tab = TabulatedHistory([np.array([1.0])] * 9)
    prob2 = scalar_problem(history=tab)
    with pytest.raises(ConfigurationError):
        validate_history_compatibility(prob2, 8)


def test_compatible_trapezoid_history_residuals_continuous():
    # residuals against the continuous functional vanish by construction;
    # via F_tau they are O(tau^2) quadrature artefacts
    win = DelayWindow(1.0, 0.5)
    hist = compatible_polynomial_history(win, "trapezoid-half")
    a, b, c, d = hist.coefficients
    from magnusdde.scalar import functional_moments
    mu = functional_moments(win, "trapezoid-half")
    Fphi = mu[0] * a + mu[1] * b + mu[2] * c + mu[3] * d
    Fdphi = mu[0] * b + 2 * mu[1] * c + 3 * mu[2] * d
    r1 = abs(b - (-Fphi) * a)
    r2 = abs(2 * c - (-(Fdphi)) * a - Fphi * Fphi * a)
    assert r1 <= 1e-12 and r2 <= 1e-12
    prob = scalar_problem("trapezoid-half", hist)
    rep64 = validate_history_compatibility(prob, 64)
    rep128 = validate_history_compatibility(prob, 128)
    assert rep64["r1"] / rep128["r1"] == pytest.approx(4.0, rel=0.15)


def test_snapshot_stride_reduces_output_but_keeps_endpoints():
    prob = scalar_problem(horizon=2.0)
    full = run(prob, 8)
    strided = run(prob, 8, snapshot_stride=4)
    assert len(full.states) == 17
    assert len(strided.states) == 5  # t = 0, 0.5, 1.0, 1.5, 2.0
    assert strided.times[0] == 0.0 and strided.times[-1] == full.times[-1]
    assert strided.states[-1][0] == full.states[-1][0]
    # per-step diagnostics still cover every step
    assert len(strided.report.times) == 17


def test_tabulated_history_matches_analytic_in_averaged_mode():
    win = DelayWindow(1.0, 1.0)
    hist = compatible_polynomial_history(win, "point")
    prob_a = scalar_problem(history=hist, horizon=1.0)
    N = 8
    tau = 1.0 / N
    values = [hist.value(-1.0 + k * tau) for k in range(N + 1)]
    prob_t = scalar_problem(history=TabulatedHistory(values), horizon=1.0)
    res_a = run(prob_a, N, phi_half_mode="averaged")
    res_t = run(prob_t, N, phi_half_mode="averaged")
    for a, b in zip(res_a.states, res_t.states):
        assert a[0] == b[0]
