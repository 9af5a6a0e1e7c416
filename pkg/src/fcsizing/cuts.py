"""Gomory mixed-integer cuts read off an optimal simplex basis.

The LP is in the logical form used by :mod:`fcsizing.simplex`: columns are
the structurals x followed by row activities s = A x, with ``[A, -I] X = 0``.
Every cut returned is a row ``pi . x >= pi0`` over the structurals only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

AWAY = 0.01  # skip basic integers closer than this to an integer
BOUND_TOL = 1e-9
MAX_DYNAMISM = 1e6


@dataclass(frozen=True)
class Cut:
    coef: np.ndarray  # dense, length n
    rhs: float
    efficacy: float


def gomory_cuts(
    A: sp.csr_matrix,
    L: np.ndarray,
    U: np.ndarray,
    integer: np.ndarray,
    basis: np.ndarray,
    X: np.ndarray,
    max_cuts: int = 100,
    min_efficacy: float = 1e-4,
    max_parallel: float = 0.98,
) -> list[Cut]:
    """Separate GMI cuts for the LP point ``X[:n]`` with the given optimal basis.

    ``L``/``U`` are bounds on all n + m columns and ``integer`` flags the
    structurals whose bounds are integral.
    """
    m, n = A.shape
    K = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
    KT = K.T.tocsr()
    try:
        lu = splu(K[:, basis].tocsc(), permc_spec="COLAMD")
    except RuntimeError:
        return []

    is_basic = np.zeros(n + m, dtype=bool)
    is_basic[basis] = True
    at_lo = ~is_basic & (np.abs(X - L) <= BOUND_TOL * np.maximum(1.0, np.abs(L)))
    at_up = ~is_basic & ~at_lo & (np.abs(X - U) <= BOUND_TOL * np.maximum(1.0, np.abs(U)))
    fixed = ~is_basic & (U - L <= BOUND_TOL)
    free_nb = ~is_basic & ~at_lo & ~at_up
    is_int = np.zeros(n + m, dtype=bool)
    is_int[:n] = integer

    xB = X[basis]
    cand = [r for r in range(m) if basis[r] < n and integer[basis[r]]]
    frac = {r: xB[r] - np.floor(xB[r]) for r in cand}
    cand = [r for r in cand if AWAY < frac[r] < 1 - AWAY]
    cand.sort(key=lambda r: -min(frac[r], 1 - frac[r]))

    x = X[:n]
    cuts: list[Cut] = []
    for r in cand[: 4 * max_cuts]:
        e = np.zeros(m)
        e[r] = 1.0
        rho = lu.solve(e, trans="T")
        t = -(KT @ rho)
        t[is_basic] = 0.0
        t[np.abs(t) < 1e-11] = 0.0
        if np.any(t[free_nb] != 0):
            continue
        # x_B = beta + sum a_j y_j with y_j >= 0 measured from the active bound;
        # fixed columns only shift beta
        sign = np.where(at_up, -1.0, 1.0)
        bound = np.where(at_up, U, L)
        allnz = np.flatnonzero(t)
        with np.errstate(invalid="ignore"):
            beta = float(t[allnz] @ bound[allnz])
        if not np.isfinite(beta):
            continue
        t[fixed] = 0.0
        a = sign * t
        nz = np.flatnonzero(a)
        abar = -a[nz]
        f0 = beta - np.floor(beta)
        if not AWAY < f0 < 1 - AWAY:
            continue
        g = np.empty(len(nz))
        ints = is_int[nz]
        fj = abar[ints] - np.floor(abar[ints])
        g[ints] = np.where(fj <= f0, fj / f0, (1 - fj) / (1 - f0))
        ac = abar[~ints]
        g[~ints] = np.where(ac >= 0, ac / f0, -ac / (1 - f0))

        # back to X: sum g_j y_j >= 1
        coefX = g * sign[nz]
        rhs = 1.0 + float(np.sum(g * sign[nz] * bound[nz]))
        pi = np.zeros(n)
        struct = nz < n
        np.add.at(pi, nz[struct], coefX[struct])
        logical = nz[~struct] - n
        if len(logical):
            pi += A[logical].T @ coefX[~struct]
        cut = _clean(pi, rhs, L[:n], U[:n])
        if cut is None:
            continue
        pi, rhs = cut
        norm = np.linalg.norm(pi)
        if norm == 0:
            continue
        eff = (rhs - pi @ x) / norm
        if eff < min_efficacy:
            continue
        cuts.append(Cut(pi, rhs, float(eff)))

    cuts.sort(key=lambda c: -c.efficacy)
    chosen: list[Cut] = []
    for c in cuts:
        u = c.coef / np.linalg.norm(c.coef)
        if all(abs(u @ (d.coef / np.linalg.norm(d.coef))) < max_parallel for d in chosen):
            chosen.append(c)
        if len(chosen) >= max_cuts:
            break
    return chosen


def _clean(pi, rhs, lb, ub):
    """Drop negligible coefficients (relaxing via bounds), scale, reject badly scaled cuts."""
    big = np.max(np.abs(pi)) if pi.size else 0.0
    if big == 0.0:
        return None
    small = (pi != 0) & (np.abs(pi) < 1e-9 * big)
    for j in np.flatnonzero(small):
        # pi_j x_j <= max over the box; move it to the right-hand side
        hi = ub[j] if pi[j] > 0 else lb[j]
        if not np.isfinite(hi):
            return None
        rhs -= pi[j] * hi
        pi[j] = 0.0
    nzv = np.abs(pi[pi != 0])
    if nzv.size == 0 or nzv.max() / nzv.min() > MAX_DYNAMISM:
        return None
    scale = 1.0 / nzv.max()
    return pi * scale, rhs * scale
