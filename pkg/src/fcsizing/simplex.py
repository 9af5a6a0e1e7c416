"""Bounded-variable revised primal simplex.

Every row gets a logical variable s with ``A x - s = 0`` and the row range
as bounds on s, so all structure lives in the bounds and the slack basis is
always a valid start. Phase 1 minimises the sum of bound violations of the
basic variables; phase 2 the true cost. The basis inverse is kept as a
sparse LU of a reference basis times a product-form eta file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


class NumericalFailure(RuntimeError):
    """Raised when the basis cannot be factorised or a pivot collapses."""

    def __init__(self, message, basis):
        super().__init__(message)
        self.basis = np.array(basis)


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: np.ndarray | None = None  # indices into [structural | logical] columns
    x_full: np.ndarray | None = None  # structural values followed by row activities


class _BasisFactor:
    def __init__(self, K: sp.csc_matrix, basis: np.ndarray):
        self.K = K
        self.basis = basis
        B = K[:, basis].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalFailure(f"basis factorisation failed: {exc}", basis) from None
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        z = self.lu.solve(a)
        for r, alpha in self.etas:
            zr = z[r] / alpha[r]
            z -= zr * alpha
            z[r] = zr
        return z

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            wr = w[r]
            w[r] = 0.0
            w[r] = (wr - w @ alpha) / alpha[r]
        return self.lu.solve(w, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))


def solve_lp(
    c,
    A,
    row_lo,
    row_hi,
    lb,
    ub,
    *,
    feas_tol: float = 1e-7,
    opt_tol: float = 1e-9,
    pivot_tol: float = 1e-7,
    max_iter: int | None = None,
    refactor_every: int = 64,
    stall_threshold: int = 60,
    basis=None,
    x_start=None,
) -> LPResult:
    """Minimise ``c.x`` subject to ``row_lo <= A x <= row_hi`` and ``lb <= x <= ub``.

    ``basis`` and ``x_start`` (both as returned in a previous result for a
    problem with the same matrix, possibly with extra trailing rows) warm
    start the method; rows beyond the old basis get their logical basic.
    """
    c = np.asarray(c, dtype=float)
    A = sp.csc_matrix(A, dtype=float)
    m, n = A.shape
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)

    if m == 0:
        return _solve_box(c, lb, ub)

    K = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
    KT = K.T.tocsr()
    L = np.concatenate([lb, np.asarray(row_lo, dtype=float)])
    U = np.concatenate([ub, np.asarray(row_hi, dtype=float)])
    if np.any(L > U + feas_tol):
        return LPResult(INFEASIBLE, None, np.nan, 0)
    cost = np.concatenate([c, np.zeros(m)])
    ntot = n + m
    movable = L < U
    if max_iter is None:
        max_iter = 50 * ntot + 1000

    X = np.where(np.isfinite(L), L, np.where(np.isfinite(U), U, 0.0))
    if basis is None:
        basis = np.arange(n, ntot)
    else:
        basis, X = _extend_start(np.asarray(basis), x_start, n, m, L, U, X)
    is_basic = np.zeros(ntot, dtype=bool)
    is_basic[basis] = True

    def recompute(factor):
        Xn = np.where(is_basic, 0.0, X)
        X[basis] = factor.ftran(-(K @ Xn))

    try:
        factor = _BasisFactor(K, basis.copy())
    except NumericalFailure:
        # stale warm start; fall back to the slack basis
        basis = np.arange(n, ntot)
        is_basic[:] = False
        is_basic[basis] = True
        factor = _BasisFactor(K, basis.copy())
    recompute(factor)
    fresh = True
    degenerate_run = 0
    bland = False
    it = 0

    while True:
        if it >= max_iter:
            return LPResult(ITERATION_LIMIT, X[:n].copy(), float(c @ X[:n]), it)
        xB = X[basis]
        LB, UB = L[basis], U[basis]
        below = xB < LB - feas_tol
        above = xB > UB + feas_tol
        phase1 = bool(below.any() or above.any())

        if phase1:
            cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            d = -(KT @ factor.btran(cB))
        else:
            d = cost - KT @ factor.btran(cost[basis])
        d[is_basic] = 0.0

        up = movable & ~is_basic & (X < U) & (d < -opt_tol)
        down = movable & ~is_basic & (X > L) & (d > opt_tol)
        eligible = up | down
        if not eligible.any():
            if not fresh:
                factor = _BasisFactor(K, basis.copy())
                recompute(factor)
                fresh = True
                continue
            if phase1:
                return LPResult(INFEASIBLE, None, np.nan, it, basis.copy(), X.copy())
            return LPResult(OPTIMAL, X[:n].copy(), float(c @ X[:n]), it, basis.copy(), X.copy())

        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
        sigma = 1.0 if up[q] else -1.0

        col = K[:, q].toarray().ravel()
        alpha = factor.ftran(col)
        dx = -sigma * alpha

        if phase1:
            lo_t = np.where(below, -np.inf, np.where(above, UB, LB))
            hi_t = np.where(below, LB, np.where(above, np.inf, UB))
        else:
            lo_t, hi_t = LB, UB

        dec = (dx < -pivot_tol) & np.isfinite(lo_t)
        inc = (dx > pivot_tol) & np.isfinite(hi_t)
        ratio = np.full(m, np.inf)
        ratio[dec] = (xB[dec] - lo_t[dec]) / -dx[dec]
        ratio[inc] = (hi_t[inc] - xB[inc]) / dx[inc]
        flip = U[q] - X[q] if sigma > 0 else X[q] - L[q]

        if bland:
            theta_row = ratio.min() if m else np.inf
            if theta_row < np.inf:
                ties = np.flatnonzero(ratio <= theta_row + 1e-12)
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = -1
        else:
            relaxed = np.full(m, np.inf)
            relaxed[dec] = (xB[dec] - lo_t[dec] + feas_tol) / -dx[dec]
            relaxed[inc] = (hi_t[inc] - xB[inc] + feas_tol) / dx[inc]
            cap = relaxed.min()
            if cap < np.inf:
                cand = np.flatnonzero(ratio <= cap)
                r = int(cand[np.argmax(np.abs(dx[cand]))])
                theta_row = ratio[r]
            else:
                r, theta_row = -1, np.inf

        if r < 0 and not np.isfinite(flip):
            if phase1:
                raise NumericalFailure("phase-1 direction without a blocking variable", basis)
            return LPResult(UNBOUNDED, None, -np.inf, it)

        it += 1
        if flip <= theta_row:
            theta = flip
            X[basis] += theta * dx
            X[q] = U[q] if sigma > 0 else L[q]
        else:
            theta = max(theta_row, 0.0)
            if abs(alpha[r]) < pivot_tol:
                raise NumericalFailure(f"pivot {alpha[r]:.3e} too small", basis)
            leaving = basis[r]
            target = lo_t[r] if dx[r] < 0 else hi_t[r]
            X[basis] += theta * dx
            X[q] += sigma * theta
            X[leaving] = target
            basis[r] = q
            is_basic[leaving] = False
            is_basic[q] = True
            if len(factor.etas) >= refactor_every or abs(alpha[r]) < 1e-7:
                factor = _BasisFactor(K, basis.copy())
                recompute(factor)
            else:
                factor.update(r, alpha)
                factor.basis = basis
        fresh = False

        if theta <= 1e-12:
            degenerate_run += 1
            if degenerate_run > stall_threshold:
                bland = True
        else:
            degenerate_run = 0
            bland = False


def _extend_start(old_basis, x_start, n, m, L, U, X):
    """Map a previous basis onto a problem with ``m >= len(old_basis)`` rows."""
    m_old = len(old_basis)
    if m_old > m:
        raise ValueError("warm-start basis has more rows than the problem")
    # logicals of old rows keep their index; new rows start with their own logical basic
    basis = np.concatenate([old_basis, np.arange(n + m_old, n + m)])
    if x_start is not None:
        xs = np.asarray(x_start, dtype=float)
        X = X.copy()
        k = min(len(xs), n + m_old)
        X[:k] = np.clip(xs[:k], L[:k], U[:k])
        X[~np.isfinite(X)] = 0.0
    return basis, X


def _solve_box(c, lb, ub) -> LPResult:
    x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
    if np.any(lb > ub) :
        return LPResult(INFEASIBLE, None, np.nan, 0)
    if not np.all(np.isfinite(x)):
        return LPResult(UNBOUNDED, None, -np.inf, 0)
    return LPResult(OPTIMAL, x, float(c @ x), 0)


def rows_to_ranges(senses, rhs):
    """Map (sense, rhs) pairs onto [lo, hi] row ranges."""
    rhs = np.asarray(rhs, dtype=float)
    senses = np.asarray(senses)
    lo = np.where(senses == "<=", -np.inf, rhs)
    hi = np.where(senses == ">=", np.inf, rhs)
    return lo, hi
