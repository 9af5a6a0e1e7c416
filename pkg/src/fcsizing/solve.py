"""Best-first branch and bound over LP relaxations, plus an independent feasibility checker."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .cuts import gomory_cuts
from .milp import GE, LE, MilpProblem
from .simplex import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LPResult,
    rows_to_ranges,
    solve_lp,
)

log = logging.getLogger(__name__)

INT_TOL = 1e-6
FEAS_TOL = 1e-7


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE_WITHIN_GAP = "Feasible-within-gap"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Limits:
    max_nodes: Optional[int] = None
    time_limit: Optional[float] = None  # s
    lp_max_iter: Optional[int] = None


@dataclass
class Solution:
    status: Status
    x: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    lp_iterations: int = 0
    elapsed: float = 0.0
    var_names: Sequence[str] = field(default_factory=tuple, repr=False)

    @property
    def has_assignment(self) -> bool:
        return self.x is not None

    def value(self, name: str) -> float:
        return float(self.x[list(self.var_names).index(name)])

    def assignment(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.var_names, self.x)}


def relative_gap(objective: float, bound: float) -> float:
    if objective == bound:
        return 0.0
    return (objective - bound) / max(abs(objective), 1e-10)


class _Relaxation:
    """LP relaxations of a problem, plus cuts added at the root."""

    def __init__(self, problem: MilpProblem, lp_solver: str, limits: Limits):
        if lp_solver not in ("simplex", "highs"):
            raise ValueError(f"unknown LP solver {lp_solver!r}")
        self.problem = problem
        self.lp_solver = lp_solver
        self.limits = limits
        self.A = problem.A.tocsr()
        self.lo, self.hi = rows_to_ranges(problem.senses, problem.rhs)
        self.n_cuts = 0
        self.iterations = 0

    @property
    def warm(self) -> bool:
        return self.lp_solver == "simplex"

    def add_cuts(self, cuts) -> None:
        rows = sp.csr_matrix(np.array([c.coef for c in cuts]))
        self.A = sp.vstack([self.A, rows], format="csr")
        self.lo = np.concatenate([self.lo, [c.rhs for c in cuts]])
        self.hi = np.concatenate([self.hi, np.full(len(cuts), np.inf)])
        self.n_cuts += len(cuts)

    def solve(self, lb, ub, warm: Optional[LPResult] = None) -> LPResult:
        if self.lp_solver == "highs":
            res = _highs_lp(self.problem.c, self.A, lb, ub, self.lo, self.hi)
        else:
            kw = {}
            if warm is not None and warm.basis is not None:
                kw = dict(basis=warm.basis, x_start=warm.x_full)
            res = solve_lp(self.problem.c, self.A, self.lo, self.hi, lb, ub,
                           max_iter=self.limits.lp_max_iter, **kw)
        self.iterations += res.iterations
        return res


def _highs_lp(c, A, lb, ub, lo, hi) -> LPResult:
    from scipy.optimize import linprog

    up = np.isfinite(hi)
    dn = np.isfinite(lo)
    A_ub = sp.vstack([A[up], -A[dn]]).tocsr()
    b_ub = np.concatenate([hi[up], -lo[dn]])
    bounds = np.column_stack([lb, ub])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, INFEASIBLE)
    x = res.x if status == OPTIMAL else None
    return LPResult(status, x, float(res.fun) if x is not None else np.nan, int(res.nit))


def _fractionality(x, int_cols):
    v = x[int_cols]
    return np.abs(v - np.round(v))


def _branch_column(frac, int_cols, prio, int_tol) -> int:
    """Most fractional column among the fractional ones of highest priority."""
    open_ = frac > int_tol
    top = prio[open_].max()
    score = np.where(open_ & (prio == top), frac, -1.0)
    return int(int_cols[int(np.argmax(score))])


def solve(
    problem: MilpProblem,
    gap_tol: float = 0.01,
    limits: Limits = Limits(),
    *,
    int_tol: float = INT_TOL,
    lp_solver: str = "simplex",
    heuristic: bool = True,
    cut_rounds: int = 30,
    dive_every: int = 25,
    rounding: Sequence[Callable[[np.ndarray], Sequence[np.ndarray]]] = (),
) -> Solution:
    """Solve a MILP to within ``gap_tol`` relative gap.

    Nodes are explored best-bound first (ties by creation order) and split
    on the most fractional integer column. With the built-in simplex, root
    Gomory cuts tighten the relaxation and children warm start from their
    parent's basis. Diving from the root and periodically from open nodes
    supplies incumbents.

    ``rounding`` holds problem-specific heuristics: each maps an LP point to
    candidate points whose integer columns are fixed before the continuous
    part is re-solved. They run at the root and wherever a dive starts.
    """
    if not gap_tol > 0:
        raise ValueError("gap_tol must be positive")
    t0 = time.perf_counter()
    int_cols = np.flatnonzero(problem.integer)
    lb0 = problem.lb.copy()
    ub0 = problem.ub.copy()
    lb0[int_cols] = np.ceil(lb0[int_cols] - int_tol)
    ub0[int_cols] = np.floor(ub0[int_cols] + int_tol)
    names = problem.var_names
    relax = _Relaxation(problem, lp_solver, limits)
    prio = problem.priority[int_cols] if problem.priority is not None else np.zeros(len(int_cols), dtype=int)

    def finish(status, x, obj, bound, nodes):
        gap = relative_gap(obj, bound) if x is not None else math.inf
        return Solution(status, x, obj + problem.c0 if x is not None else math.nan,
                        bound + problem.c0, gap, nodes, relax.iterations, time.perf_counter() - t0, names)

    if np.any(lb0 > ub0):
        return finish(Status.INFEASIBLE, None, math.nan, math.inf, 0)

    incumbent: Optional[np.ndarray] = None
    inc_obj = math.inf

    def out_of_time():
        return limits.time_limit is not None and time.perf_counter() - t0 > limits.time_limit

    def offer(xs, obj, source):
        nonlocal incumbent, inc_obj
        if xs is not None and obj < inc_obj - 1e-12 * max(1.0, abs(obj)):
            incumbent, inc_obj = xs, obj
            log.info("incumbent %.8g from %s", obj + problem.c0, source)

    def fix_and_solve(x, lb, ub, rounding, warm=None, full=True):
        """Fix integer columns to rounded LP values and re-solve the continuous part."""
        v = np.clip(rounding(x[int_cols] if full else x), lb[int_cols], ub[int_cols])
        flb, fub = lb.copy(), ub.copy()
        flb[int_cols] = v
        fub[int_cols] = v
        res = relax.solve(flb, fub, warm)
        if res.status == OPTIMAL:
            xs = res.x.copy()
            xs[int_cols] = v
            return xs, float(problem.c @ xs)
        return None, math.inf

    def try_rounding(res, lb, ub):
        for hook in rounding:
            for y in hook(res.x):
                v = np.round(np.asarray(y)[int_cols])
                if np.any(v < lb[int_cols]) or np.any(v > ub[int_cols]):
                    continue
                xs, obj = fix_and_solve(v, lb, ub, lambda w: w, res, full=False)
                log.debug("rounding candidate: %s", "infeasible" if xs is None else f"{obj + problem.c0:.8g}")
                offer(xs, obj, "rounding")

    def dive(res, lb, ub, max_depth=None):
        """Fix integral columns, round the least fractional one of top priority, re-solve.

        A rounding that fails is flipped once before the dive gives up.
        """
        lb, ub = lb.copy(), ub.copy()
        cur = res
        cur_level = prio.max() if len(prio) else 0
        depth = 0
        while max_depth is None or depth < max_depth:
            depth += 1
            if out_of_time():
                return
            x = cur.x
            frac = _fractionality(x, int_cols)
            if frac.max() <= int_tol:
                offer(*fix_and_solve(x, lb, ub, np.round, cur), "dive")
                return
            open_ = frac > int_tol
            level = prio[open_].max()
            if level < cur_level:
                # a priority class just became integral
                try_rounding(cur, lb0, ub0)
                cur_level = level
            done = int_cols[~open_ & (prio >= level)]
            lb[done] = ub[done] = np.round(x[done])
            top = open_ & (prio == level)
            j = int_cols[int(np.argmin(np.where(top, frac, np.inf)))]
            olb, oub = lb[j], ub[j]
            nxt = None
            for val in (np.round(x[j]), np.floor(x[j]) if np.round(x[j]) > x[j] else np.ceil(x[j])):
                if not olb <= val <= oub:
                    continue
                lb[j] = ub[j] = val
                trial = relax.solve(lb, ub, cur)
                if trial.status == OPTIMAL and trial.objective < inc_obj:
                    nxt = trial
                    break
            if nxt is None:
                log.debug("dive stops at depth %d on %s = %.4g", depth, names[j], x[j])
                return
            cur = nxt

    root = relax.solve(lb0, ub0)
    if root.status == INFEASIBLE:
        return finish(Status.INFEASIBLE, None, math.nan, math.inf, 1)
    if root.status == UNBOUNDED:
        return finish(Status.UNBOUNDED, None, -math.inf, -math.inf, 1)
    if root.status == ITERATION_LIMIT:
        return finish(Status.ITERATION_LIMIT, None, math.nan, -math.inf, 1)

    if relax.warm and len(int_cols) and cut_rounds > 0:
        root = _cut_loop(problem, relax, root, lb0, ub0, int_cols, cut_rounds, int_tol, out_of_time)
        if root.status == INFEASIBLE:
            return finish(Status.INFEASIBLE, None, math.nan, math.inf, 1)

    if heuristic and len(int_cols):
        for rnd in (np.round, np.ceil):
            offer(*fix_and_solve(root.x, lb0, ub0, rnd, root), f"root {rnd.__name__}")
        try_rounding(root, lb0, ub0)
        dive(root, lb0, ub0)

    counter = 0
    heap: list = [(root.objective, counter, lb0, ub0, root, root)]
    nodes = 0
    global_bound = root.objective
    status = Status.OPTIMAL
    while heap:
        global_bound = heap[0][0]
        if incumbent is not None and relative_gap(inc_obj, global_bound) <= gap_tol:
            # a bound that meets the incumbent proves optimality without emptying the tree
            closed = relative_gap(inc_obj, global_bound) <= 1e-9
            status = Status.OPTIMAL if closed else Status.FEASIBLE_WITHIN_GAP
            break
        if limits.max_nodes is not None and nodes >= limits.max_nodes:
            status = Status.ITERATION_LIMIT
            break
        if out_of_time():
            status = Status.ITERATION_LIMIT
            break

        bound, _, lb, ub, res, parent = heapq.heappop(heap)
        if bound >= inc_obj:
            continue
        if res is None:
            res = relax.solve(lb, ub, parent)
        nodes += 1
        if res.status == INFEASIBLE:
            continue
        if res.status == UNBOUNDED:
            return finish(Status.UNBOUNDED, None, -math.inf, -math.inf, nodes)
        if res.status != OPTIMAL:
            status = Status.ITERATION_LIMIT
            break
        if res.objective >= inc_obj - 1e-9 * max(1.0, abs(inc_obj)):
            continue

        frac = _fractionality(res.x, int_cols)
        if frac.size == 0 or frac.max() <= int_tol:
            offer(*fix_and_solve(res.x, lb, ub, np.round, res), "node")
            continue

        if heuristic and nodes % dive_every == 0:
            try_rounding(res, lb0, ub0)
            dive(res, lb, ub)

        j = _branch_column(frac, int_cols, prio, int_tol)
        v = res.x[j]
        down_ub = ub.copy()
        down_ub[j] = math.floor(v)
        up_lb = lb.copy()
        up_lb[j] = math.ceil(v)
        for clb, cub in ((lb, down_ub), (up_lb, ub)):
            counter += 1
            heapq.heappush(heap, (res.objective, counter, clb, cub, None, res))
        if nodes % 100 == 0:
            log.debug("node %d open %d bound %.8g incumbent %.8g", nodes, len(heap), heap[0][0], inc_obj)
    else:
        global_bound = inc_obj

    if incumbent is None:
        if status == Status.OPTIMAL:
            return finish(Status.INFEASIBLE, None, math.nan, math.inf, nodes)
        return finish(Status.ITERATION_LIMIT, None, math.nan, global_bound, nodes)
    global_bound = min(global_bound, inc_obj)
    return finish(status, incumbent, inc_obj, global_bound, nodes)


def _cut_loop(problem, relax, root, lb0, ub0, int_cols, rounds, int_tol, out_of_time):
    integer = np.zeros(problem.n_vars, dtype=bool)
    integer[int_cols] = True
    stalls = 0
    for r in range(rounds):
        if out_of_time():
            break
        if _fractionality(root.x, int_cols).max() <= int_tol:
            break
        L = np.concatenate([lb0, relax.lo])
        U = np.concatenate([ub0, relax.hi])
        cuts = gomory_cuts(relax.A, L, U, integer, root.basis, root.x_full)
        if not cuts:
            break
        relax.add_cuts(cuts)
        res = relax.solve(lb0, ub0, root)
        if res.status != OPTIMAL:
            return res
        gain = (res.objective - root.objective) / max(1.0, abs(res.objective))
        log.info("cut round %d: %d cuts, bound %.8g", r + 1, len(cuts), res.objective)
        root = res
        stalls = stalls + 1 if gain < 1e-4 else 0
        if stalls >= 2:
            break
    return root


# -- feasibility oracle -------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    name: str
    kind: str  # "row", "bound" or "integrality"
    activity: float
    limit: float
    amount: float


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...]

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def rows(self) -> list[dict]:
        return [v.__dict__.copy() for v in self.violations]

    def to_text(self) -> str:
        if not self.violations:
            return "feasible: no violations\n"
        lines = [f"{len(self.violations)} violation(s):"]
        for v in self.violations:
            lines.append(
                f"  {v.kind:<11} {v.name}: activity {v.activity:.9g} vs limit {v.limit:.9g} "
                f"(violated by {v.amount:.6g})"
            )
        return "\n".join(lines) + "\n"


def check_feasible(problem: MilpProblem, assignment, tol: float = 1e-6) -> ViolationReport:
    """List every row, bound and integrality requirement broken beyond ``tol``.

    ``tol`` is scaled by ``max(1, |limit|)``. The check evaluates each row
    directly from the problem data and shares no code with the solver.
    """
    if isinstance(assignment, Mapping):
        missing = [n for n in problem.var_names if n not in assignment]
        if missing:
            raise ValueError(f"assignment lacks values for {len(missing)} variable(s): {missing[:10]}")
        x = np.array([float(assignment[n]) for n in problem.var_names])
    else:
        x = np.asarray(assignment, dtype=float)
        if x.shape != (problem.n_vars,):
            raise ValueError(f"assignment has shape {x.shape}, expected ({problem.n_vars},)")
        if np.any(np.isnan(x)):
            j = int(np.flatnonzero(np.isnan(x))[0])
            raise ValueError(f"assignment lacks a value for {problem.var_names[j]}")

    out = []
    A = problem.A.tocsr()
    for i in range(problem.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        act = float(sum(v * x[j] for j, v in zip(A.indices[lo:hi], A.data[lo:hi])))
        rhs = float(problem.rhs[i])
        sense = problem.senses[i]
        if sense == LE:
            excess = act - rhs
        elif sense == GE:
            excess = rhs - act
        else:
            excess = abs(act - rhs)
        if excess > tol * max(1.0, abs(rhs)):
            out.append(Violation(problem.row_names[i], "row", act, rhs, excess))
    for j, name in enumerate(problem.var_names):
        v = x[j]
        if v < problem.lb[j] - tol * max(1.0, abs(problem.lb[j])):
            out.append(Violation(name, "bound", v, problem.lb[j], problem.lb[j] - v))
        elif v > problem.ub[j] + tol * max(1.0, abs(problem.ub[j])):
            out.append(Violation(name, "bound", v, problem.ub[j], v - problem.ub[j]))
        if problem.integer[j] and abs(v - round(v)) > tol:
            out.append(Violation(name, "integrality", v, round(v), abs(v - round(v))))
    return ViolationReport(tuple(out))
