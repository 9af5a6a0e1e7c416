"""Frequency-constrained PV/battery sizing MILP.

Units: power in MW, PV area in thousands of m2 (so kW/m2 times area gives
MW), ramp durations in s, objective in M$.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .domain import EconomicParams, PlantConfig, fcr_capacity
from .milp import EQ, GE, LE, MilpProblem, ProblemBuilder
from .ramps import RampEvent, RampHull

HOURS_PER_YEAR = 8760.0


class ScenarioMode(str, Enum):
    BASELINE = "Baseline"
    NOFC = "NoFC"
    STATICFC = "StaticFC"
    DYNAMICFC = "DynamicFC"

    @classmethod
    def parse(cls, text: str) -> "ScenarioMode":
        key = text.replace("-", "").replace("_", "").replace(" ", "").lower()
        for mode in cls:
            if mode.value.lower() == key:
                return mode
        raise ValueError(f"unknown scenario mode {text!r}; choose from {[m.value for m in cls]}")

    @property
    def has_pv(self) -> bool:
        return self is not ScenarioMode.BASELINE

    @property
    def has_reserves(self) -> bool:
        return self in (ScenarioMode.STATICFC, ScenarioMode.DYNAMICFC)


class InputValidationError(ValueError):
    pass


@dataclass(frozen=True)
class SizingInputs:
    load: np.ndarray  # MW per hour
    irradiance_mean: np.ndarray  # kW/m2 per hour
    hulls: tuple[RampHull, ...]
    plant: PlantConfig
    econ: EconomicParams
    hours_per_year: float = HOURS_PER_YEAR

    def __post_init__(self):
        load = np.asarray(self.load, dtype=float)
        irr = np.asarray(self.irradiance_mean, dtype=float)
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "irradiance_mean", irr)
        object.__setattr__(self, "hulls", tuple(self.hulls))
        lengths = {"load": len(load), "irradiance_mean": len(irr), "hulls": len(self.hulls)}
        if len(set(lengths.values())) != 1:
            detail = ", ".join(f"{k}={v}" for k, v in lengths.items())
            raise InputValidationError(f"series lengths disagree: {detail}")
        if len(load) == 0:
            raise InputValidationError("empty horizon")
        if np.any(load <= 0):
            raise InputValidationError(f"load must be positive (hour {int(np.argmin(load))})")
        if np.any(irr < 0):
            raise InputValidationError("irradiance must be non-negative")

    @property
    def horizon(self) -> int:
        return len(self.load)

    @property
    def period_weight(self) -> float:
        """Years-equivalent multiplier turning one horizon into a discounted lifetime."""
        return self.econ.annuity() * self.hours_per_year / self.horizon

    def truncated(self, horizon: int) -> "SizingInputs":
        return SizingInputs(self.load[:horizon], self.irradiance_mean[:horizon],
                            self.hulls[:horizon], self.plant, self.econ, self.hours_per_year)


COMMITMENT_FORMS = ("tight", "window")


def _area_range(inp: SizingInputs, mode: ScenarioMode, h: int, n: int, a_max: float):
    """Smallest and largest PV area for which hour ``h`` is feasible with ``n`` units on.

    Drops commitment history and the battery, so the range is a relaxation.
    Returns None when no area works.
    """
    gens = sorted(inp.plant.generators, key=lambda g: -g.p_max)
    hi_cap = sum(g.p_max for g in gens[:n])
    lo_cap = sum(sorted(g.p_min for g in inp.plant.generators)[:n])
    d_pv, load, irr = inp.plant.d_pv, float(inp.load[h]), float(inp.irradiance_mean[h])
    # columns: T (GT output), S (trip), B (PV disturbance), inj, A
    A_ub = [[-1, 0, 0, -1, 0], [0, 0, 0, 1, -d_pv * irr]]
    b_ub = [-load, 0.0]
    bounds = [(lo_cap, hi_cap), (0, 0), (0, 0), (0, None), (0, a_max if mode.has_pv else 0)]
    if mode.has_reserves:
        bounds[1] = (0, min(g.p_max for g in gens))
        bounds[2] = (0, None)
        if n:
            A_ub.append([1.0 / n, -1, 0, 0, 0])  # the largest unit carries at least the mean
            b_ub.append(0.0)
        A_ub += [[1, 1, 1, 0, 0], [-1, 1, 1, 0, 0], [0, 0, 1, -1, 0]]
        b_ub += [hi_cap, -lo_cap, 0.0]
        for ev in inp.hulls[h].events:
            A_ub.append([0, 0, -1, 0, d_pv * ev.drop])
            b_ub.append(0.0)
    out = []
    for sign in (1.0, -1.0):
        res = linprog([0, 0, 0, 0, sign], A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status != 0:
            return None
        out.append(float(res.x[4]))
    return out


def _lower_chain(points):
    """Lower convex chain of 2-D points, left to right."""
    chain = []
    for q in sorted(set(points)):
        while len(chain) >= 2:
            (x1, y1), (x2, y2) = chain[-2], chain[-1]
            if (x2 - x1) * (q[1] - y1) - (y2 - y1) * (q[0] - x1) <= 1e-12:
                chain.pop()
            else:
                break
        chain.append(q)
    return chain


def count_envelope(inp: SizingInputs, mode: ScenarioMode, h: int, a_max: float):
    """Valid lower bounds on the unit count of hour ``h`` as a function of PV area.

    Returns ``(n_min, segments)`` where each segment ``(a1, n1, a2, n2)`` says
    the count lies on or above the line through (a1, n1) and (a2, n2).
    """
    points = []
    for n in range(len(inp.plant.generators) + 1):
        rng = _area_range(inp, mode, h, n, a_max)
        if rng is not None:
            points += [(rng[0], n), (rng[1], n)]
    if not points:
        return None, []
    n_min = min(n for _, n in points)
    chain = _lower_chain(points)
    segs = [(a1, n1, a2, n2) for (a1, n1), (a2, n2) in zip(chain, chain[1:]) if a2 - a1 > 1e-9 and n1 != n2]
    return n_min, segs


def build_problem(
    mode: ScenarioMode, inp: SizingInputs, *, commitment: str = "tight", unit_count: bool = True
) -> MilpProblem:
    """Assemble the sizing MILP for ``mode``.

    ``commitment`` picks the minimum up/down rows: ``"window"`` bounds
    sums of past on-states, ``"tight"`` bounds sums of recent start-ups and
    shut-downs. Both admit the same integer schedules; the second has a
    much stronger LP relaxation.

    ``unit_count`` adds an integer ``N_h`` equal to the number of committed
    units in hour h and gives it branching priority. It does not change the
    feasible schedules, but branching on it first sidesteps the symmetry
    between identical units.
    """
    mode = ScenarioMode(mode)
    if commitment not in COMMITMENT_FORMS:
        raise ValueError(f"commitment must be one of {COMMITMENT_FORMS}")
    plant, econ = inp.plant, inp.econ
    gens = plant.generators
    G, H = len(gens), inp.horizon
    d_pv = plant.d_pv
    fuel_w = inp.period_weight * econ.energy_price / 1e6  # M$ per (volume/h) per step

    b = ProblemBuilder()
    P, rho, u, v, fcr = {}, {}, {}, {}, {}
    with_fcr = mode is not ScenarioMode.NOFC

    for h in range(H):
        for m, g in enumerate(gens):
            P[m, h] = b.add_var(f"P_{m}_{h}", 0.0, g.p_max, cost=fuel_w * g.fuel_a, symbol="P", key=(m, h))
            rho[m, h] = b.add_var(f"rho_{m}_{h}", 0, 1, integer=True, cost=fuel_w * g.fuel_b,
                                  symbol="rho", key=(m, h))
            u[m, h] = b.add_var(f"u_{m}_{h}", 0, 1, symbol="u", key=(m, h))
            v[m, h] = b.add_var(f"v_{m}_{h}", 0, 1, symbol="v", key=(m, h))
            if with_fcr:
                fcr[m, h] = b.add_var(f"Pfcr_{m}_{h}", 0.0, fcr_capacity(g, plant),
                                      symbol="P_fcr", key=(m, h))

    inj, area = {}, {}
    if mode.has_pv:
        pv_ub = plant.pv_inst_max if plant.pv_inst_max is not None else np.inf
        pv_inst = b.add_var("Ppv_inst", 0.0, pv_ub, cost=econ.c_pv / 1000.0, symbol="P_pv_inst")
        if plant.per_hour_area:
            for h in range(H):
                area[h] = b.add_var(f"Apv_{h}", 0.0, np.inf, symbol="A_pv", key=h)
        else:
            a = b.add_var("Apv", 0.0, np.inf, symbol="A_pv")
            area = {h: a for h in range(H)}
        for h in range(H):
            inj[h] = b.add_var(f"Pinj_{h}", 0.0, np.inf, symbol="P_inj", key=h)

    sud, pvb, batf = {}, {}, {}
    if mode.has_reserves:
        p_sud_ub = min(g.p_max for g in gens)
        bat_inst = b.add_var("Pbat_inst", 0.0, np.inf, cost=econ.c_bat / 1000.0, symbol="P_bat_inst")
        for h in range(H):
            sud[h] = b.add_var(f"Psud_{h}", 0.0, p_sud_ub, symbol="P_sud", key=h)
            pvb[h] = b.add_var(f"Ppvb_{h}", 0.0, np.inf, symbol="P_pv_dist", key=h)
            batf[h] = b.add_var(f"Pbatfcr_{h}", 0.0, np.inf, symbol="P_bat_fcr", key=h)

    n_on = {}
    if unit_count:
        envelopes = _count_envelopes(inp, mode)
        for h in range(H):
            n_min, segs = envelopes[h]
            n_on[h] = b.add_var(f"N_{h}", n_min, G, integer=True, symbol="N_on", key=h)
            b.set_priority(n_on[h], 1)
            b.add_row(f"count_{h}", [(rho[m, h], 1.0) for m in range(G)] + [(n_on[h], -1.0)], EQ, 0.0,
                      family="unit_count")
            for k, (a1, n1, a2, n2) in enumerate(segs):
                slope = (n2 - n1) / (a2 - a1)
                b.add_row(f"countenv_{h}_{k}", [(n_on[h], 1.0), (area[h], -slope)], GE, n1 - slope * a1,
                          family="count_envelope")

    for h in range(H):
        I = float(inp.irradiance_mean[h])
        # (b) balance
        terms = [(P[m, h], 1.0) for m in range(G)]
        if mode.has_pv:
            terms.append((inj[h], 1.0))
        b.add_row(f"balance_{h}", terms, GE, inp.load[h], family="balance")

        # (c) PV injection and installed capacity
        if mode.has_pv:
            b.add_row(f"pvinj_{h}", [(inj[h], 1.0), (area[h], -d_pv * I)], LE, 0.0, family="pv_injection")
            b.add_row(f"pvinst_{h}", [(pv_inst, 1.0), (area[h], -I)], GE, 0.0, family="pv_installed")

        # (d) limits with FCR headroom
        for m, g in enumerate(gens):
            if with_fcr:
                cap = fcr_capacity(g, plant)
                b.add_row(f"fcrcap_{m}_{h}", [(fcr[m, h], 1.0), (rho[m, h], -cap)], LE, 0.0, family="fcr_cap")
                b.add_row(f"pmax_{m}_{h}", [(P[m, h], 1.0), (rho[m, h], -g.p_max), (fcr[m, h], 1.0)],
                          LE, 0.0, family="gen_max")
                b.add_row(f"pmin_{m}_{h}", [(P[m, h], 1.0), (rho[m, h], -g.p_min), (fcr[m, h], -1.0)],
                          GE, 0.0, family="gen_min")
            else:
                b.add_row(f"pmax_{m}_{h}", [(P[m, h], 1.0), (rho[m, h], -g.p_max)], LE, 0.0, family="gen_max")
                b.add_row(f"pmin_{m}_{h}", [(P[m, h], 1.0), (rho[m, h], -g.p_min)], GE, 0.0, family="gen_min")

        # (e) commitment logic; units are on for long enough before h = 0
        for m, g in enumerate(gens):
            terms = [(u[m, h], 1.0), (v[m, h], -1.0), (rho[m, h], -1.0)]
            if h > 0:
                terms.append((rho[m, h - 1], 1.0))
                rhs = 0.0
            else:
                rhs = -1.0  # rho at h = -1 is 1
            b.add_row(f"trans_{m}_{h}", terms, EQ, rhs, family="transition")
            b.add_row(f"onetrans_{m}_{h}", [(u[m, h], 1.0), (v[m, h], 1.0)], LE, 1.0,
                      family="single_transition")
            if commitment == "tight":
                # a start-up within the last t_up hours keeps the unit on, a
                # shut-down within the last t_dn hours keeps it off
                ups = [(u[m, k], 1.0) for k in range(max(0, h - g.t_up + 1), h + 1)]
                b.add_row(f"minup_{m}_{h}", ups + [(rho[m, h], -1.0)], LE, 0.0, family="min_up")
                dns = [(v[m, k], 1.0) for k in range(max(0, h - g.t_dn + 1), h + 1)]
                b.add_row(f"mindn_{m}_{h}", dns + [(rho[m, h], 1.0)], LE, 1.0, family="min_down")
            elif h >= 1:
                window = range(h - g.t_up, h)
                pre = sum(1 for k in window if k < 0)
                terms = [(rho[m, k], 1.0) for k in window if k >= 0] + [(v[m, h], -g.t_up)]
                b.add_row(f"minup_{m}_{h}", terms, GE, -pre, family="min_up")
                window = range(h - g.t_dn, h)
                pre = sum(1 for k in window if k < 0)
                terms = [(rho[m, k], 1.0) for k in window if k >= 0] + [(u[m, h], g.t_dn)]
                b.add_row(f"mindn_{m}_{h}", terms, LE, g.t_dn - pre, family="min_down")

        if not mode.has_reserves:
            continue

        # (f) sudden disturbance: the largest dispatched unit may trip
        for m in range(G):
            b.add_row(f"sud_{m}_{h}", [(sud[h], 1.0), (P[m, h], -1.0)], GE, 0.0, family="sudden")

        # (g) worst-case PV disturbance
        ramps: Sequence[RampEvent] = inp.hulls[h].events
        for r, ev in enumerate(ramps):
            b.add_row(f"pvdist_{h}_{r}", [(pvb[h], 1.0), (area[h], -d_pv * ev.drop)], GE, 0.0,
                      family="pv_disturbance")
        b.add_row(f"pvdistcap_{h}", [(pvb[h], 1.0), (inj[h], -1.0)], LE, 0.0, family="pv_disturbance_cap")

        # (h) FRR up and down capacity
        up = [(rho[m, h], g.p_max) for m, g in enumerate(gens)] + [(P[m, h], -1.0) for m in range(G)]
        b.add_row(f"frrup_{h}", up + [(sud[h], -1.0), (pvb[h], -1.0)], GE, 0.0, family="frr_up")
        dn = [(P[m, h], 1.0) for m in range(G)] + [(rho[m, h], -g.p_min) for m, g in enumerate(gens)]
        b.add_row(f"frrdn_{h}", dn + [(sud[h], -1.0), (pvb[h], -1.0)], GE, 0.0, family="frr_down")

        # (i) battery FCR covers what GT FCR and ramp-limited FRR cannot
        for r, ev in enumerate(ramps):
            terms = [(batf[h], 1.0), (sud[h], -1.0), (area[h], -d_pv * ev.drop)]
            terms += [(rho[m, h], g.rr_frr * ev.duration) for m, g in enumerate(gens)]
            if mode is ScenarioMode.DYNAMICFC:
                terms += [(fcr[m, h], 1.0) for m in range(G)]
            b.add_row(f"batfcr_{h}_{r}", terms, GE, 0.0, family="battery_fcr")
        b.add_row(f"batinst_{h}", [(bat_inst, 1.0), (batf[h], -1.0)], GE, 0.0, family="battery_installed")

    return b.build()


def _count_envelopes(inp: SizingInputs, mode: ScenarioMode):
    """Per hour: (smallest feasible unit count, envelope segments in PV area)."""
    plant = inp.plant
    irr = inp.irradiance_mean
    finite = plant.pv_inst_max is not None and np.isfinite(plant.pv_inst_max)
    out = []
    for h in range(inp.horizon):
        if not mode.has_pv:
            a_max = 0.0
        elif plant.per_hour_area:
            a_max = plant.pv_inst_max / irr[h] if finite and irr[h] > 0 else np.inf
        else:
            a_max = plant.pv_inst_max / irr.max() if finite and irr.max() > 0 else np.inf
        if not np.isfinite(a_max):
            out.append((0, []))  # the envelope needs a bounded area
            continue
        n_min, segs = count_envelope(inp, mode, h, a_max)
        # an hour infeasible for every count is left for the solver to report
        out.append((0, []) if n_min is None else (n_min, segs))
    return out


def battery_fcr_requirement(p_sud: float, total_gt_fcr: float, dp_pv: float, total_frr_ramp: float) -> float:
    """Battery FCR (MW) needed for one ramp on top of a unit trip, floored at zero."""
    return max(0.0, p_sud - total_gt_fcr + dp_pv - total_frr_ramp)


def short_term_feasibility(frr_ramps, fcr, dp: float, duration: float) -> bool:
    """True when FRR ramped over ``duration`` plus total FCR covers a power drop ``dp``."""
    if not duration > 0:
        raise ValueError("ramp duration must be positive")
    return float(np.sum(frr_ramps)) * duration + float(np.sum(fcr)) >= dp


# -- solution extraction -------------------------------------------------------

@dataclass
class Schedule:
    """Per-hour decision values pulled out of a solved problem."""

    mode: str
    horizon: int
    status: str
    objective: float
    gap: float
    rho: list  # [m][h]
    p_gen: list  # [m][h]
    p_fcr: list  # [m][h]
    p_inj: list  # [h]
    p_sud: list  # [h]
    p_pv_dist: list  # [h]
    p_bat_fcr: list  # [h]
    area_pv: list  # [h], thousands of m2
    p_pv_inst: float = 0.0
    p_bat_inst: float = 0.0
    generator_names: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls(**json.loads(text))


def extract_schedule(mode: ScenarioMode, problem: MilpProblem, solution, inp: SizingInputs) -> Schedule:
    mode = ScenarioMode(mode)
    x = np.asarray(solution.x)
    G, H = len(inp.plant.generators), inp.horizon

    def grid(symbol, default=0.0):
        if symbol not in problem.index:
            return [[default] * H for _ in range(G)]
        idx = problem.index[symbol]
        return [[float(x[idx[m, h]]) for h in range(H)] for m in range(G)]

    def series(symbol):
        if symbol not in problem.index:
            return [0.0] * H
        idx = problem.index[symbol]
        if isinstance(idx, int):
            return [float(x[idx])] * H
        return [float(x[idx[h]]) for h in range(H)]

    def scalar(symbol):
        return float(x[problem.index[symbol]]) if symbol in problem.index else 0.0

    p_gen = grid("P")
    p_sud = series("P_sud")
    if not mode.has_reserves:
        p_sud = [max(p_gen[m][h] for m in range(G)) for h in range(H)]
    return Schedule(
        mode=mode.value,
        horizon=H,
        status=str(getattr(solution.status, "value", solution.status)),
        objective=float(solution.objective),
        gap=float(solution.gap),
        rho=[[int(round(val)) for val in row] for row in grid("rho")],
        p_gen=p_gen,
        p_fcr=grid("P_fcr"),
        p_inj=series("P_inj"),
        p_sud=p_sud,
        p_pv_dist=series("P_pv_dist"),
        p_bat_fcr=series("P_bat_fcr"),
        area_pv=series("A_pv"),
        p_pv_inst=scalar("P_pv_inst"),
        p_bat_inst=scalar("P_bat_inst"),
        generator_names=[g.name for g in inp.plant.generators],
    )


def ramp_requirements(schedule: Schedule, plant: PlantConfig, hull: RampHull, hour: int,
                      use_gt_fcr: Optional[bool] = None):
    """Battery requirement per ramp of ``hull`` at ``hour`` for a solved schedule (not floored)."""
    mode = ScenarioMode(schedule.mode)
    if use_gt_fcr is None:
        use_gt_fcr = mode is ScenarioMode.DYNAMICFC
    gens = plant.generators
    on = [m for m in range(len(gens)) if schedule.rho[m][hour] == 1]
    total_fcr = sum(schedule.p_fcr[m][hour] for m in on) if use_gt_fcr else 0.0
    rr = sum(gens[m].rr_frr for m in on)
    out = []
    for ev in hull.events:
        dp = plant.d_pv * ev.drop * schedule.area_pv[hour]
        out.append(schedule.p_sud[hour] - total_fcr + dp - rr * ev.duration)
    return out


def _repair_runs(on: np.ndarray, t_up: int, t_dn: int) -> np.ndarray:
    """Smallest superset of ``on`` (one unit, one row of hours) meeting minimum up/down times.

    The unit is taken to be on, and free to stop, before hour 0. Only
    on-hours are added: short gaps between on-runs are filled and short
    on-runs are stretched forward.
    """
    on = on.copy()
    H = len(on)
    changed = True
    while changed:
        changed = False
        h = 0
        while h < H:
            k = h
            while k < H and on[k] == on[h]:
                k += 1
            if not on[h] and k < H and k - h < t_dn:
                on[h:k] = True  # gap too short to restart after
                changed = True
            elif on[h] and h > 0 and k < H and k - h < t_up:
                on[h:min(H, h + t_up)] = True
                changed = True
            h = k
    return on


def commitment_heuristic(problem: MilpProblem, inp: SizingInputs, mode: ScenarioMode):
    """Rounding callback for :func:`fcsizing.solve.solve`.

    Two candidates come from an LP point. The first rounds the
    committed-unit count of each hour up (at least two units in hours with
    reserve-relevant ramps) and builds a schedule that meets the counts and
    the minimum up/down times. The second commits every unit with a positive
    LP on-state and repairs the runs; with zero minimum outputs the LP's
    continuous values stay feasible under it, so it re-solves.
    """
    gens = inp.plant.generators
    G, H = len(gens), inp.horizon
    rho_idx = np.array([[problem.index["rho"][m, h] for h in range(H)] for m in range(G)])
    n_idx = problem.index.get("N_on")
    floor = np.array([2 if ScenarioMode(mode).has_reserves and inp.hulls[h].events else 0 for h in range(H)])
    floor = np.minimum(floor, G)

    def by_count(need):
        on = np.ones(G, dtype=bool)
        age = np.array([max(g.t_up, g.t_dn) for g in gens])  # hours in the current state
        rho = np.zeros((G, H))
        for h in range(H):
            short = need[h] - on.sum()
            for m in sorted(range(G), key=lambda m: -age[m]):
                if short <= 0:
                    break
                if not on[m] and age[m] >= gens[m].t_dn:
                    on[m], age[m], short = True, 0, short - 1
            if short > 0:
                return None
            # a unit stops only if, for its whole minimum down time, the
            # others that are on or may restart cover the counts
            for m in sorted(range(G), key=lambda m: -age[m]):
                if not on[m] or age[m] < gens[m].t_up:
                    continue
                ok = True
                for k in range(h, min(H, h + gens[m].t_dn)):
                    ready = sum(1 for i in range(G) if not on[i] and age[i] + k - h >= gens[i].t_dn)
                    if on.sum() - 1 + ready < need[k]:
                        ok = False
                        break
                if ok:
                    on[m], age[m] = False, 0
            rho[:, h] = on
            age += 1
        return rho

    def as_point(x, rho):
        y = x.copy()
        y[rho_idx] = rho
        if n_idx is not None:
            for h in range(H):
                y[n_idx[h]] = rho[:, h].sum()
        return y

    def propose(x):
        x = np.asarray(x)
        lp_rho = x[rho_idx]
        out = []
        need = np.clip(np.maximum(np.ceil(lp_rho.sum(axis=0) - 1e-6), floor), 0, G).astype(int)
        rho = by_count(need)
        if rho is not None:
            out.append(as_point(x, rho))
        repaired = np.array([_repair_runs(lp_rho[m] > 1e-6, g.t_up, g.t_dn) for m, g in enumerate(gens)])
        out.append(as_point(x, repaired.astype(float)))
        return out

    return propose
