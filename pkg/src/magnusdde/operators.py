"""Sparse linear operators and matrix-exponential actions.

Everything downstream (the delay integrator, the epidemic model) talks to
operators through this module: coordinate-format sparse matrices with a
deterministic canonical layout, plus ``expm_action`` computing e^{tau*A} x
with either a dense scaling-and-squaring backend or an adaptive
Arnoldi/Krylov backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ConfigurationError, KrylovConvergenceError

__all__ = [
    "SparseOperator",
    "StateVector",
    "ExpmConfig",
    "apply",
    "expm_action",
    "one_norm_columns",
]


class SparseOperator:
    """Square sparse matrix in canonical (row-major, duplicate-free) COO form.

    Entries are merged and sorted at construction so identical inputs always
    produce bit-identical operators regardless of the order triplets arrived
    in. Exact zeros produced by merging are dropped.
    """

    __slots__ = ("dim", "rows", "cols", "vals", "symmetry_hint", "_csr")

    def __init__(self, dim, rows, cols, vals, symmetry_hint=False):
        dim = int(dim)
        if dim <= 0:
            raise ConfigurationError("operator dimension must be positive")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise ConfigurationError("rows/cols/vals must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= dim or cols.min() < 0 or cols.max() >= dim):
            raise ConfigurationError("entry index out of range for dim=%d" % dim)
        if rows.size > 1:
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            # merge duplicates: sum values sharing the same (row, col)
            key_change = np.empty(rows.size, dtype=bool)
            key_change[0] = True
            key_change[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(key_change)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        if rows.size:
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        self.dim = dim
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self.symmetry_hint = bool(symmetry_hint)
        self._csr = None
        if self.symmetry_hint and not self._is_exactly_symmetric():
            raise ConfigurationError("symmetry_hint set but entries are not symmetric")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim):
        return cls(dim, [], [], [])

    @classmethod
    def identity(cls, dim):
        idx = np.arange(dim)
        return cls(dim, idx, idx, np.ones(dim), symmetry_hint=True)

    @classmethod
    def from_dense(cls, mat, symmetry_hint=False):
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigurationError("dense input must be square")
        r, c = np.nonzero(mat)
        return cls(mat.shape[0], r, c, mat[r, c], symmetry_hint=symmetry_hint)

    @classmethod
    def diagonal(cls, values):
        values = np.asarray(values, dtype=np.float64).ravel()
        idx = np.arange(values.size)
        return cls(values.size, idx, idx, values, symmetry_hint=True)

    @classmethod
    def _from_canonical(cls, dim, rows, cols, vals):
        """Trusted fast path: caller guarantees merged, row-major entries."""
        op = cls.__new__(cls)
        op.dim = dim
        op.rows = rows
        op.cols = cols
        op.vals = vals
        op.symmetry_hint = False
        op._csr = None
        return op

    # -- views -------------------------------------------------------------

    @property
    def nnz(self):
        return self.vals.size

    @property
    def csr(self):
        if self._csr is None:
            self._csr = scipy.sparse.csr_matrix(
                (self.vals, (self.rows, self.cols)), shape=(self.dim, self.dim)
            )
        return self._csr

    def dense(self):
        out = np.zeros((self.dim, self.dim))
        out[self.rows, self.cols] = self.vals
        return out

    def one_norm(self):
        """Max absolute column sum (induced 1-norm)."""
        if self.nnz == 0:
            return 0.0
        return float(np.max(np.bincount(self.cols, weights=np.abs(self.vals), minlength=self.dim)))

    def _is_exactly_symmetric(self):
        d = self.csr - self.csr.T
        d.eliminate_zeros()
        return d.nnz == 0

    # -- algebra -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise ConfigurationError("dimension mismatch in operator sum")
        return SparseOperator(
            self.dim,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vals, other.vals]),
        )

    def scaled(self, alpha):
        return SparseOperator(self.dim, self.rows, self.cols, alpha * self.vals,
                              symmetry_hint=self.symmetry_hint)

    def __repr__(self):
        return "SparseOperator(dim=%d, nnz=%d)" % (self.dim, self.nnz)


@dataclass
class StateVector:
    """Flat real state with named contiguous block slices.

    The block slices must partition [0, dim); a single anonymous block is
    used when none are given.
    """

    data: np.ndarray
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64).ravel()
        if not self.blocks:
            self.blocks = {"u": slice(0, self.data.size)}
        self._check_partition()

    def _check_partition(self):
        covered = sorted((s.start, s.stop) for s in self.blocks.values())
        pos = 0
        for start, stop in covered:
            if start != pos or stop < start:
                raise ConfigurationError("block slices must partition [0, dim)")
            pos = stop
        if pos != self.data.size:
            raise ConfigurationError("block slices must cover the full vector")

    @property
    def dim(self):
        return self.data.size

    def block(self, name):
        return self.data[self.blocks[name]]

    def with_data(self, data):
        """Same block structure, new payload."""
        return StateVector(data, dict(self.blocks))


@dataclass(frozen=True)
class ExpmConfig:
    """Backend selection for matrix-exponential actions.

    method "dense-scaling-squaring" is the dense reference (fine up to a few
    hundred unknowns); "krylov-arnoldi" is the production path with adaptive
    subspace size and internal time substepping.
    """

    method: str = "krylov-arnoldi"
    tol: float = 1e-10
    max_krylov_dim: int = 96

    def __post_init__(self):
        if self.method not in ("dense-scaling-squaring", "krylov-arnoldi"):
            raise ConfigurationError("unknown expm method %r" % (self.method,))
        if not (self.tol > 0.0):
            raise ConfigurationError("expm tol must be positive")
        if self.max_krylov_dim < 2:
            raise ConfigurationError("max_krylov_dim must be at least 2")


DEFAULT_EXPM = ExpmConfig()


def _data_of(x):
    return x.data if isinstance(x, StateVector) else np.asarray(x, dtype=np.float64)


def _like(x, data):
    return x.with_data(data) if isinstance(x, StateVector) else data


def apply(A, x):
    """Exact sparse matrix-vector product A x."""
    v = _data_of(x)
    if v.size != A.dim:
        raise ConfigurationError("apply: operator dim %d != vector dim %d" % (A.dim, v.size))
    return _like(x, A.csr.dot(v))


def one_norm_columns(A):
    """Signed column sums of A, exactly as stored (ascending row order)."""
    out = np.zeros(A.dim)
    np.add.at(out, A.cols, A.vals)
    return out


def expm_action(A, tau, x, cfg=DEFAULT_EXPM):
    """Compute y ~= e^{tau*A} x with relative accuracy cfg.tol.

    tau must be finite and nonnegative. Raises KrylovConvergenceError when
    the Arnoldi backend cannot reach the tolerance within its subspace and
    substepping budget.
    """
    v = _data_of(x)
    if v.size != A.dim:
        raise ConfigurationError("expm_action: operator dim %d != vector dim %d" % (A.dim, v.size))
    if not math.isfinite(tau) or tau < 0.0:
        raise ConfigurationError("expm_action: tau must be finite and >= 0")
    if tau == 0.0 or A.nnz == 0:
        return _like(x, v.copy())
    if A.dim == 1:
        # scalar semigroup is exact; shared by both backends
        return _like(x, v * math.exp(tau * float(A.vals[0])))
    if cfg.method == "dense-scaling-squaring":
        y = scipy.linalg.expm(tau * A.dense()).dot(v)
    else:
        y = _krylov_expm(A, tau, v, cfg)
    return _like(x, y)


def _krylov_expm(A, tau, v, cfg):
    """Arnoldi approximation of e^{tau*A} v with time substepping.

    Each substep builds a Krylov basis until two successive small-problem
    evaluations agree to the step tolerance; on stagnation, the substep is
    halved. Failure to converge within a bounded number of substeps raises
    with the achieved residual estimate.
    """
    csr = A.csr
    remaining = tau
    y = v
    step = tau
    substeps = 0
    best_res = math.inf
    while remaining > 0.0:
        step = min(step, remaining)
        ok, candidate, res = _arnoldi_step(csr, step, y, cfg)
        best_res = min(best_res, res)
        if ok:
            y = candidate
            remaining -= step
            substeps += 1
            if substeps > 10000:
                raise KrylovConvergenceError(
                    "krylov-arnoldi: substep budget exhausted", best_res)
            # gentle growth so we recover after overly cautious halving
            step *= 2.0
        else:
            step *= 0.5
            if step < tau * 1e-12 or not math.isfinite(step):
                raise KrylovConvergenceError(
                    "krylov-arnoldi: no convergence within max_krylov_dim=%d "
                    "(residual estimate %.3e)" % (cfg.max_krylov_dim, res), res)
    return y


def _arnoldi_step(csr, step, v, cfg):
    """One Arnoldi solve of e^{step*A} v. Returns (converged, value, residual)."""
    beta = float(np.linalg.norm(v))
    if beta == 0.0:
        return True, v.copy(), 0.0
    n = v.size
    mmax = min(cfg.max_krylov_dim, n)
    V = np.empty((mmax + 1, n))
    H = np.zeros((mmax + 1, mmax))
    V[0] = v / beta
    prev = None
    res = math.inf
    for j in range(mmax):
        w = csr.dot(V[j])
        # modified Gram-Schmidt with one reorthogonalisation pass
        for i in range(j + 1):
            h = float(np.dot(V[i], w))
            H[i, j] += h
            w -= h * V[i]
        for i in range(j + 1):
            h = float(np.dot(V[i], w))
            H[i, j] += h
            w -= h * V[i]
        hnext = float(np.linalg.norm(w))
        H[j + 1, j] = hnext
        m = j + 1
        happy = hnext <= 1e-14 * max(1.0, abs(H[: m, : m]).max())
        if happy or m == mmax or m % 2 == 0:
            small = scipy.linalg.expm(step * H[:m, :m])[:, 0]
            cur = beta * V[:m].T.dot(small)
            if happy:
                return True, cur, 0.0
            if prev is not None:
                res = float(np.linalg.norm(cur - prev))
                if res <= cfg.tol * max(float(np.linalg.norm(cur)), 1e-300):
                    return True, cur, res
            prev = cur
        if hnext > 0.0:
            V[j + 1] = w / hnext
    return False, prev if prev is not None else v, res
