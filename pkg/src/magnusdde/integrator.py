"""Two-level exponential time stepper for quasilinear delay problems.

State u advances on the grid t_n = n*tau, tau = delta/N. Each full step is a
single exponential action

    u_{n+1} = exp(tau * Q(sum_l kappa_l F_l(u_{n+l+1/2}))) u_n,

whose exponent samples the delayed history at the midpoint of the step via
auxiliary half values. Half values are read off the initial history for the
first N steps and afterwards generated by a tau/2 exponential step whose
exponent freezes the generator at the left endpoint:

    u_{n+1/2} = exp(tau/2 * Q(sum_l kappa_l F_l(u_{n-2N+l}))) u_{n-N}.

A half value with index n approximates u((n+1/2)*tau - delta); indices
follow execution order, not physical time. Negative full indices hold the
initial history, u_n = phi(n*tau) for -N <= n <= 0.

Both index families fill contiguously, so the store keeps them in
preallocated arrays when a capacity is known; the weighted history sums are
then single dot products against contiguous windows, which keeps the cost
per step O(lag count) in compiled code.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .delay import DelayWindow, HistorySlice, discretize, evaluate_discretized
from .errors import ConfigurationError, GuardViolationError
from .operators import DEFAULT_EXPM, SparseOperator, StateVector, expm_action

__all__ = [
    "GeneratorSpec",
    "AnalyticHistory",
    "TabulatedHistory",
    "ProblemSpec",
    "InvariantGuard",
    "HistoryStore",
    "RunReport",
    "RunResult",
    "seed_history",
    "half_step",
    "full_step",
    "run",
    "validate_history_compatibility",
]


@dataclass
class GeneratorSpec:
    """The state-dependent generator w -> Q(w) = Q0 + Qtilde(w).

    q0 is the fixed (typically stiff) part, may be None; q_tilde maps a
    state-space element to the bounded part. All built-in models have affine
    q_tilde, which is what linear_part() assumes. fast_assemble, when given,
    must produce the same operator as q0 + q_tilde(w) and exists purely to
    skip repeated sparsity-pattern work.
    """

    dim: int
    q_tilde: callable
    q0: SparseOperator = None
    fast_assemble: callable = None

    def assemble(self, w) -> SparseOperator:
        w = np.asarray(w, dtype=np.float64)
        if self.fast_assemble is not None:
            return self.fast_assemble(w)
        qt = self.q_tilde(w)
        if qt.dim != self.dim:
            raise ConfigurationError("q_tilde produced dim %d, expected %d" % (qt.dim, self.dim))
        return qt if self.q0 is None else self.q0 + qt

    def linear_part(self, d) -> SparseOperator:
        """Directional derivative of w -> Qtilde(w) at any point (affine maps)."""
        d = np.asarray(d, dtype=np.float64)
        return self.q_tilde(d) + self.q_tilde(np.zeros(self.dim)).scaled(-1.0)


class AnalyticHistory:
    """Initial history given in closed form, with derivatives on demand."""

    analytic = True

    def __init__(self, phi, dphi=None, d2phi=None):
        self.phi = phi
        self.dphi = dphi
        self.d2phi = d2phi

    def value(self, s):
        return np.atleast_1d(np.asarray(self.phi(s), dtype=np.float64))


class TabulatedHistory:
    """History known only at the grid points s_k = -delta + k*tau, k = 0..N.

    Only usable with the averaged half-value mode, which never needs
    off-grid samples.
    """

    analytic = False

    def __init__(self, values):
        self.values = [np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in values]

    def grid_value(self, k):
        return self.values[k]


@dataclass
class ProblemSpec:
    """Full problem description: generator, delay, initial history, horizon."""

    generator: GeneratorSpec
    window: DelayWindow
    delay_mode: str
    history: object
    horizon: float
    blocks: dict = None
    mass_weights: np.ndarray = None  # quadrature weights of the mass functional
    mass_target: float = None
    name: str = ""

    def __post_init__(self):
        if not (self.horizon >= 0.0):
            raise ConfigurationError("horizon must be nonnegative")

    def discretize(self, N):
        if callable(self.delay_mode):
            return self.delay_mode(self.window, N)
        return discretize(self.window, self.delay_mode, N)

    def state(self, data) -> StateVector:
        return StateVector(np.asarray(data, dtype=np.float64),
                           dict(self.blocks) if self.blocks else {})

    def mass(self, u):
        if self.mass_weights is None:
            return None
        return float(np.dot(self.mass_weights, u))


@dataclass(frozen=True)
class InvariantGuard:
    """Runtime invariant monitor.

    predicate: "none", "nonnegative", or "nonnegative-mass". The tolerance is
    absolute on negativity (scaled by the problem's mass target when one
    exists) and relative on mass. action "abort" raises on violation,
    "record" only counts it.
    """

    predicate: str = "nonnegative-mass"
    tolerance: float = 1e-9
    action: str = "record"

    def __post_init__(self):
        if self.predicate not in ("none", "nonnegative", "nonnegative-mass"):
            raise ConfigurationError("unknown guard predicate %r" % (self.predicate,))
        if self.tolerance < 0.0:
            raise ConfigurationError("guard tolerance must be >= 0")
        if self.action not in ("record", "abort"):
            raise ConfigurationError("guard action must be 'record' or 'abort'")


NO_GUARD = InvariantGuard(predicate="none")


class HistoryStore:
    """Integer-indexed storage for full values u_n and half values u_{n+1/2}.

    Full indices start at -N (offset by +N internally, so no fractional or
    negative keys exist anywhere). Values arrive contiguously; with a known
    capacity they live in preallocated 2D arrays and windows of consecutive
    indices come back as zero-copy views. Optional access tracking records
    ("r"/"w", "full"/"half", index) tuples for causality audits (dict-backed
    mode only).
    """

    def __init__(self, N, tau, dim=None, capacity_steps=None, track_access=False):
        self.N = N
        self.tau = tau
        self.access_log = [] if track_access else None
        self._array_mode = capacity_steps is not None and not track_access
        self._half_top = -1  # highest half index written (both modes)
        if self._array_mode:
            self._full = np.empty((capacity_steps + N + 1, dim))
            self._half = np.empty((capacity_steps + 2 * N + 1, dim))
            self._full_top = -N - 1   # highest full index written
        else:
            self.full = {}
            self.half = {}

    def _note(self, op, kind, n):
        if self.access_log is not None:
            self.access_log.append((op, kind, n))

    # -- writes ------------------------------------------------------------

    def set_full(self, n, u):
        self._note("w", "full", n)
        if self._array_mode:
            assert n == self._full_top + 1, "full values must arrive contiguously"
            self._full[n + self.N] = u
            self._full_top = n
        else:
            self.full[n] = np.asarray(u, dtype=np.float64)

    def set_half(self, n, u):
        self._note("w", "half", n)
        if self._array_mode:
            assert n == self._half_top + 1, "half values must arrive contiguously"
            self._half[n] = u
        else:
            self.half[n] = np.asarray(u, dtype=np.float64)
        self._half_top = max(self._half_top, n)

    def half_top(self):
        return self._half_top

    # -- reads ---------------------------------------------------------------

    def get_full(self, n):
        self._note("r", "full", n)
        if self._array_mode:
            if n > self._full_top or n < -self.N:
                raise AssertionError("full value %d read before it was computed" % n)
            return self._full[n + self.N]
        try:
            return self.full[n]
        except KeyError:
            raise AssertionError("full value %d read before it was computed" % n)

    def get_half(self, n):
        self._note("r", "half", n)
        if self._array_mode:
            if n > self._half_top:
                raise AssertionError("half value %d read before it was computed" % n)
            return self._half[n]
        try:
            return self.half[n]
        except KeyError:
            raise AssertionError("half value %d read before it was computed" % n)

    def has_half(self, n):
        if self._array_mode:
            return n <= self._half_top
        return n in self.half

    def full_window(self, start, count):
        """Rows start .. start+count-1 as one (count, dim) array."""
        if self._array_mode:
            lo = start + self.N
            if start < -self.N or start + count - 1 > self._full_top:
                raise AssertionError("full window [%d, %d) not yet computed"
                                     % (start, start + count))
            self._note("r", "full", start)
            return self._full[lo:lo + count]
        return np.stack([self.get_full(start + k) for k in range(count)])

    def half_window(self, start, count):
        if self._array_mode:
            if start < 0 or start + count - 1 > self._half_top:
                raise AssertionError("half window [%d, %d) not yet computed"
                                     % (start, start + count))
            self._note("r", "half", start)
            return self._half[start:start + count]
        return np.stack([self.get_half(start + k) for k in range(count)])

    def evict_older_than(self, n_full, n_half):
        """Drop stale entries (dict-backed stores only; arrays stay put)."""
        if self._array_mode:
            return
        for k in [k for k in self.full if k < n_full]:
            del self.full[k]
        for k in [k for k in self.half if k < n_half]:
            del self.half[k]


@dataclass
class RunReport:
    """Aggregated and per-step run diagnostics.

    Wall time is measured but deliberately excluded from serialised reports
    so identical configs produce byte-identical output files.
    """

    steps: int = 0
    min_component: float = math.inf
    max_mass_drift: float = 0.0
    guard_violations: int = 0
    wall_time_seconds: float = 0.0
    times: list = field(default_factory=list)
    min_series: list = field(default_factory=list)
    drift_series: list = field(default_factory=list)

    def to_dict(self):
        return {
            "steps": self.steps,
            "min_component": self.min_component,
            "max_mass_drift": self.max_mass_drift,
            "guard_violations": self.guard_violations,
        }


@dataclass
class RunResult:
    times: np.ndarray
    states: list
    report: RunReport
    store: HistoryStore


def seed_history(spec: ProblemSpec, N: int, phi_half_mode="exact",
                 capacity_steps=None, track_access=False) -> HistoryStore:
    """Populate full[-N..0] and half[0..N-1] from the initial history.

    Exact mode samples phi((n+1/2)tau - delta) directly and needs an
    analytic history; averaged mode uses the two neighbouring grid samples,
    (phi(n tau - delta) + phi((n+1) tau - delta)) / 2, and also works for
    tabulated histories.
    """
    if phi_half_mode not in ("exact", "averaged"):
        raise ConfigurationError("phi_half_mode must be 'exact' or 'averaged'")
    tau = spec.window.delta / N
    if spec.history.analytic:
        grid = [spec.history.value(n * tau) for n in range(-N, 1)]
    else:
        if phi_half_mode != "averaged":
            raise ConfigurationError("tabulated history requires phi_half_mode='averaged'")
        if len(spec.history.values) != N + 1:
            raise ConfigurationError("tabulated history must provide N+1 samples")
        grid = [spec.history.grid_value(k) for k in range(N + 1)]
    store = HistoryStore(N, tau, dim=grid[0].size, capacity_steps=capacity_steps,
                         track_access=track_access)
    for n in range(-N, 1):
        store.set_full(n, grid[n + N])
    for n in range(N):
        if phi_half_mode == "exact":
            store.set_half(n, spec.history.value((n + 0.5) * tau - spec.window.delta))
        else:
            store.set_half(n, 0.5 * (grid[n] + grid[n + 1]))
    return store


def _weighted(disc, window):
    """kappa . window for identity pointwise maps, row loop otherwise.

    The dot-product kernel is fixed for fixed shapes, so results are
    bit-reproducible run to run on one machine.
    """
    if disc.maps is None:
        return np.dot(disc.weights_array, window)
    return evaluate_discretized(disc, HistorySlice(list(window)))


def half_step(store: HistoryStore, spec: ProblemSpec, disc, n, expm_cfg=DEFAULT_EXPM,
              guard=NO_GUARD, report=None):
    """Auxiliary value u_{n+1/2} for n >= N, memoised in the store."""
    if store.has_half(n):
        return store.get_half(n)
    N = store.N
    assert n >= N, "half values below N come from the seeded history"
    w = _weighted(disc, store.full_window(n - 2 * N, disc.lag_count() + 1))
    Q = spec.generator.assemble(w)
    u = expm_action(Q, 0.5 * store.tau, store.get_full(n - N), expm_cfg)
    store.set_half(n, u)
    if report is not None:
        _guard_check(spec, guard, u, n, report, kind="half")
    return u


def full_step(store: HistoryStore, spec: ProblemSpec, disc, n, expm_cfg=DEFAULT_EXPM,
              guard=NO_GUARD, report=None):
    """Advance u_n -> u_{n+1}; evaluates the guard on the new and half values."""
    # only indices beyond the contiguous watermark are actually new
    for m in range(max(store.N, store.half_top() + 1), n + disc.lag_count() + 1):
        half_step(store, spec, disc, m, expm_cfg, guard, report)
    w = _weighted(disc, store.half_window(n, disc.lag_count() + 1))
    Q = spec.generator.assemble(w)
    u = expm_action(Q, store.tau, store.get_full(n), expm_cfg)
    store.set_full(n + 1, u)
    if report is not None:
        _guard_check(spec, guard, u, n + 1, report, kind="full")
    return u


def _guard_check(spec, guard, u, step, report, kind):
    if guard.predicate == "none":
        return
    umin = float(np.min(u))
    report.min_component = min(report.min_component, umin)
    scale = spec.mass_target if spec.mass_target else max(1.0, float(np.max(np.abs(u))))
    drift = None
    if guard.predicate == "nonnegative-mass":
        if spec.mass_weights is None or not spec.mass_target:
            raise ConfigurationError("mass guard requires mass_weights and mass_target")
        drift = abs(spec.mass(u) - spec.mass_target) / spec.mass_target
        report.max_mass_drift = max(report.max_mass_drift, drift)
    bad_neg = umin < -guard.tolerance * scale
    bad_mass = drift is not None and drift > guard.tolerance
    if bad_neg or bad_mass:
        report.guard_violations += 1
        if guard.action == "abort":
            which = "negativity" if bad_neg else "mass"
            comp = int(np.argmin(u)) if bad_neg else None
            raise GuardViolationError(
                "guard violation (%s) at %s step %d: min=%.3e drift=%s"
                % (which, kind, step, umin, "%.3e" % drift if drift is not None else "n/a"),
                step=step, component=comp)


def run(spec: ProblemSpec, N: int, guard=NO_GUARD, expm_cfg=DEFAULT_EXPM,
        phi_half_mode="exact", snapshot_stride=1, track_access=False) -> RunResult:
    """Integrate the problem to its horizon on the grid tau = delta/N.

    Snapshots are recorded every `snapshot_stride` steps (always including
    t=0 and the final time).
    """
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    if snapshot_stride < 1:
        raise ConfigurationError("snapshot_stride must be >= 1")
    t_start = time.perf_counter()
    disc = spec.discretize(N)
    tau = spec.window.delta / N
    steps = int(math.floor(spec.horizon / tau + 1e-9))
    store = seed_history(spec, N, phi_half_mode, capacity_steps=steps,
                         track_access=track_access)
    report = RunReport()
    u0 = store.get_full(0)
    times = [0.0]
    states = [np.array(u0, copy=True)]
    _guard_check(spec, guard, u0, 0, report, kind="full")
    for m in range(min(N, steps + disc.lag_count())):
        _guard_check(spec, guard, store.get_half(m), m, report, kind="half")
    report.times.append(0.0)
    report.min_series.append(float(np.min(u0)))
    report.drift_series.append(
        abs(spec.mass(u0) - spec.mass_target) / spec.mass_target
        if spec.mass_weights is not None and spec.mass_target else 0.0)
    for n in range(steps):
        u = full_step(store, spec, disc, n, expm_cfg, guard, report)
        t = (n + 1) * tau
        report.steps = n + 1
        report.times.append(t)
        report.min_series.append(float(np.min(u)))
        report.drift_series.append(
            abs(spec.mass(u) - spec.mass_target) / spec.mass_target
            if spec.mass_weights is not None and spec.mass_target else 0.0)
        if (n + 1) % snapshot_stride == 0 or n + 1 == steps:
            times.append(t)
            states.append(np.array(u, copy=True))
    report.wall_time_seconds = time.perf_counter() - t_start
    return RunResult(np.asarray(times), states, report, store)


def validate_history_compatibility(spec: ProblemSpec, N: int, thresholds=(1e-8, 1e-6)):
    """Residuals of the two boundary compatibility conditions at t = 0.

    r1 measures phi'(0-) - Q(F(phi)) phi(0); r2 measures the second-order
    condition, with the generator's directional derivative evaluated through
    its affine linear part and F'(phi) phi' through the grid discretisation
    of the delay functional applied to phi' samples. Both are informational:
    runs are permitted regardless, but clean second-order convergence is only
    expected when both pass.
    """
    h = spec.history
    if not h.analytic or h.dphi is None or h.d2phi is None:
        raise ConfigurationError(
            "history compatibility validation needs an analytic sampler with "
            "first and second derivatives")
    disc = spec.discretize(N)
    tau = spec.window.delta / N
    delta = spec.window.delta
    pts = [-delta + l * tau for l in range(disc.lag_count() + 1)]
    phi0 = h.value(0.0)
    dphi0 = np.atleast_1d(np.asarray(h.dphi(0.0), dtype=np.float64))
    d2phi0 = np.atleast_1d(np.asarray(h.d2phi(0.0), dtype=np.float64))
    w = evaluate_discretized(disc, HistorySlice([h.value(s) for s in pts]))
    d = evaluate_discretized(disc, HistorySlice(
        [np.atleast_1d(np.asarray(h.dphi(s), dtype=np.float64)) for s in pts]))
    Q = spec.generator.assemble(w)
    r1 = float(np.max(np.abs(dphi0 - Q.csr.dot(phi0))))
    term1 = spec.generator.linear_part(d).csr.dot(phi0)
    term2 = Q.csr.dot(Q.csr.dot(phi0))
    r2 = float(np.max(np.abs(d2phi0 - term1 - term2)))
    return {
        "r1": r1,
        "r2": r2,
        "r1_threshold": thresholds[0],
        "r2_threshold": thresholds[1],
        "r1_ok": r1 <= thresholds[0],
        "r2_ok": r2 <= thresholds[1],
    }
