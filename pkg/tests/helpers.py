"""Shared builders for small sizing instances."""

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from fcsizing.config import load_config
from fcsizing.model import SizingInputs
from fcsizing.ramps import RampEvent, RampHull
from fcsizing.simplex import rows_to_ranges

BENCHMARK_RAMPS = ((2, 0.061), (19, 0.613), (36, 0.778), (48, 0.878))


def benchmark_hull(hour=0):
    return RampHull(hour, tuple(RampEvent(hour, float(d), i) for d, i in BENCHMARK_RAMPS))


def small_inputs(load, irradiance, hull_hours=(), cfg=None, drops=BENCHMARK_RAMPS):
    """Inputs over ``len(load)`` hours; hours listed in ``hull_hours`` carry the given ramps."""
    cfg = cfg or load_config()
    hulls = []
    for h in range(len(load)):
        evs = tuple(RampEvent(h, float(d), i) for d, i in drops) if h in hull_hours else ()
        hulls.append(RampHull(h, evs))
    return SizingInputs(np.asarray(load, float), np.asarray(irradiance, float), tuple(hulls), cfg.plant, cfg.econ)


def day_inputs(hours=8, seed=0, ramps_every=3, cfg=None):
    """A morning-to-afternoon window with ramps in some sunny hours."""
    rng = np.random.default_rng(seed)
    hod = 7 + np.arange(hours)
    irr = np.clip(np.sin(np.pi * (hod - 6) / 12), 0, None) ** 1.2
    load = rng.uniform(110, 140, hours)
    hull_hours = [h for h in range(hours) if irr[h] > 0.5 and h % ramps_every == 0]
    drops = tuple((d, round(0.5 * i, 3)) for d, i in BENCHMARK_RAMPS)
    return small_inputs(load, irr, hull_hours, cfg, drops)


def reference_optimum(problem, gap=1e-7):
    """Independent optimum from the HiGHS MILP solver bundled with SciPy."""
    lo, hi = rows_to_ranges(problem.senses, problem.rhs)
    res = milp(problem.c, constraints=LinearConstraint(problem.A, lo, hi),
               integrality=problem.integer.astype(int), bounds=Bounds(problem.lb, problem.ub),
               options=dict(mip_rel_gap=gap))
    if res.status != 0:
        return None, None
    return float(res.fun) + problem.c0, res.x


def random_milp(seed, max_binaries=12):
    """Small random MILP: up to ``max_binaries`` binaries, a few bounded continuous columns."""
    import itertools  # noqa: F401  (kept local: only the oracle below needs it)

    from fcsizing.milp import EQ, GE, LE, ProblemBuilder

    rng = np.random.default_rng(seed)
    nb = int(rng.integers(1, max_binaries + 1))
    nc = int(rng.integers(0, 4))
    b = ProblemBuilder()
    cols = []
    for j in range(nb):
        cols.append(b.add_var(f"b{j}", 0, 1, integer=True, cost=float(rng.integers(-10, 11))))
    for j in range(nc):
        cols.append(b.add_var(f"x{j}", 0.0, float(rng.integers(1, 6)), cost=float(rng.normal())))
    b.c0 = float(rng.integers(-3, 4))
    for i in range(int(rng.integers(1, 7))):
        k = int(rng.integers(1, len(cols) + 1))
        chosen = rng.choice(len(cols), size=k, replace=False)
        terms = [(cols[j], float(rng.integers(-5, 6))) for j in chosen]
        sense = [LE, LE, GE, EQ][int(rng.integers(0, 4))]
        if sense == EQ:
            # keep equalities satisfiable by anchoring at a random integral point
            point = rng.integers(0, 2, len(cols))
            rhs = float(sum(v * point[j] for j, v in zip(chosen, (t[1] for t in terms))))
        else:
            rhs = float(rng.integers(-4, 9))
        b.add_row(f"r{i}", terms, sense, rhs)
    return b.build()


def enumerate_optimum(problem):
    """Best objective over all integer assignments; None when infeasible.

    Assignments are visited in order of a box bound on the continuous part,
    so the LP for an assignment is skipped once that bound cannot win.
    """
    import itertools

    from scipy.optimize import linprog

    ints = np.flatnonzero(problem.integer)
    conts = np.flatnonzero(~problem.integer)
    lo, hi = rows_to_ranges(problem.senses, problem.rhs)
    A = problem.A.toarray()
    grid = np.array(list(itertools.product(*[range(int(problem.lb[j]), int(problem.ub[j]) + 1) for j in ints])),
                    dtype=float).reshape(-1, len(ints))
    acts = grid @ A[:, ints].T
    base = grid @ problem.c[ints] + problem.c0
    if len(conts) == 0:
        ok = np.all(acts >= lo - 1e-9, axis=1) & np.all(acts <= hi + 1e-9, axis=1)
        return float(base[ok].min()) if ok.any() else None
    cc = problem.c[conts]
    box = float(np.sum(np.where(cc >= 0, cc * problem.lb[conts], cc * problem.ub[conts])))
    Ac = A[:, conts]
    up, dn = np.isfinite(hi), np.isfinite(lo)
    A_ub = np.vstack([Ac[up], -Ac[dn]])
    bounds = list(zip(problem.lb[conts], problem.ub[conts]))
    # rows the continuous box cannot reconcile rule an assignment out without an LP
    lb, ub = problem.lb[conts], problem.ub[conts]
    reach_lo = np.sum(np.minimum(Ac * lb, Ac * ub), axis=1)
    reach_hi = np.sum(np.maximum(Ac * lb, Ac * ub), axis=1)
    viable = np.all(acts + reach_hi >= lo - 1e-9, axis=1) & np.all(acts + reach_lo <= hi + 1e-9, axis=1)
    best = None
    for k in np.argsort(base, kind="stable"):
        if best is not None and base[k] + box >= best - 1e-9:
            break
        if not viable[k]:
            continue
        b_ub = np.concatenate([hi[up] - acts[k][up], -(lo[dn] - acts[k][dn])])
        res = linprog(cc, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status == 0:
            val = float(res.fun) + float(base[k])
            best = val if best is None else min(best, val)
    return best


def worst_case_sim(battery=10.8, fcr_total=22.5, dt=0.01, t_end=120.0, **kw):
    """Three 45 MW units at 30 MW, a 22.5 MW trip and the 19 s ramp at t = 10 s.

    ``s_base`` = 75 MW puts 7.5 MW of FCR on each unit (10 % droop, 1 % band).
    """
    from fcsizing.domain import FrequencyLimits, GeneratorSpec
    from fcsizing.sim import CommittedUnit, LoadStep, PowerRamp, SimConfig

    units = tuple(CommittedUnit(GeneratorSpec(f"GT{i + 1}", 45.0, 0.0, 0.1, 5.51, 0.208), 30.0) for i in range(3))
    return SimConfig(
        committed=units,
        events=(LoadStep(10.0, 22.5), PowerRamp(10.0, 19.0, 22.656)),
        freq=FrequencyLimits(50.0, 0.01, 0.03),
        p_base=45.0,
        s_base=75.0,
        battery_power=battery,
        dt=dt,
        t_end=t_end,
        fcr_limit=fcr_total / 3,
        **kw,
    )


# acceptance verdicts, printed in the terminal summary by conftest
ACCEPTANCE: list[str] = []


class criterion:
    """Context manager recording one PASS/FAIL line for an acceptance criterion."""

    def __init__(self, number, title):
        self.label = f"criterion {number}: {title}"
        self.details = []

    def note(self, text):
        self.details.append(str(text))

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        verdict = "PASS" if kind is None else "FAIL"
        extra = "; ".join(self.details)
        if kind is not None and exc is not None:
            extra = "; ".join(x for x in (extra, f"{kind.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}") if x)
        line = f"{verdict}  {self.label}" + (f"  [{extra}]" if extra else "")
        ACCEPTANCE.append(line)
        print(line)
        return False
