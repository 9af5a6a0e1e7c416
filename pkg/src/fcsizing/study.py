"""Glue between raw data, configuration and the sizing model."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import SimParams, StudyConfig
from .domain import PlantConfig
from .milp import MilpProblem
from .model import (
    ScenarioMode,
    Schedule,
    SizingInputs,
    build_problem,
    commitment_heuristic,
    extract_schedule,
    ramp_requirements,
)
from .ramps import IrradianceSeries, RampHull, hourly_hulls, hourly_means
from .report import StudyReport, compute_indicators
from .sim import CommittedUnit, LoadStep, PowerRamp, SimConfig
from .solve import Limits, Solution, Status, ViolationReport, check_feasible, solve

log = logging.getLogger(__name__)


def extract_hulls(series: IrradianceSeries, cfg: StudyConfig) -> list[RampHull]:
    r = cfg.ramps
    return hourly_hulls(series, r.min_drop, r.smooth_window, r.max_duration)


def make_inputs(
    cfg: StudyConfig,
    load: Sequence[float],
    irradiance_mean: Sequence[float],
    hulls: Sequence[RampHull],
    horizon: Optional[int] = None,
) -> SizingInputs:
    """Align hourly series and hulls, optionally truncating to ``horizon`` hours."""
    load = np.asarray(load, dtype=float)
    irr = np.asarray(irradiance_mean, dtype=float)
    hulls = list(hulls)
    if horizon is not None:
        short = {k: len(v) for k, v in (("load", load), ("irradiance", irr), ("hulls", hulls)) if len(v) < horizon}
        if short:
            raise ValueError(f"horizon {horizon} exceeds available data: {short}")
        load, irr, hulls = load[:horizon], irr[:horizon], hulls[:horizon]
    return SizingInputs(load, irr, tuple(hulls), cfg.plant, cfg.econ)


def inputs_from_series(cfg: StudyConfig, series: IrradianceSeries, load, horizon=None) -> SizingInputs:
    hulls = extract_hulls(series, cfg)
    return make_inputs(cfg, load, hourly_means(series), hulls, horizon)


TRIP_TIME = 10.0  # s


class NoSynchronousUnits(ValueError):
    """Too few committed units to simulate a trip."""


def binding_hour(schedule: Schedule, plant: PlantConfig, hulls: Sequence[RampHull]) -> Optional[int]:
    """Hour whose worst ramp asks the most of the battery; ``None`` without ramps."""
    best, best_req = None, -np.inf
    for h in range(min(schedule.horizon, len(hulls))):
        reqs = ramp_requirements(schedule, plant, hulls[h], h)
        if reqs and max(reqs) > best_req:
            best, best_req = h, max(reqs)
    return best


def worst_case_configs(schedule: Schedule, plant: PlantConfig, hull: RampHull, hour: int,
                       sim: SimParams) -> list[SimConfig]:
    """One contingency per ramp of ``hull``, the trip coinciding with the ramp start.

    The trip size is the scheduled sudden-loss allowance (at least the
    largest dispatch). With ``sim.trip_model == "load_step"`` every committed
    unit keeps its governor and inertia, matching the reserve rows of the
    sizing problem; ``"unit_loss"`` removes the largest unit instead. Units
    keep their dispatch and, in DynamicFC only, their scheduled FCR; the other
    modes rely on FRR and the battery. An empty hull gives the trip alone.
    """
    if not 0 <= hour < schedule.horizon:
        raise ValueError(f"hour {hour} outside the schedule horizon {schedule.horizon}")
    mode = ScenarioMode(schedule.mode)
    gens = plant.generators
    if len(schedule.rho) != len(gens):
        raise ValueError(f"schedule has {len(schedule.rho)} units, configuration has {len(gens)}")
    on = [m for m in range(len(gens)) if schedule.rho[m][hour] == 1]
    unit_loss = sim.trip_model == "unit_loss"
    need = 2 if unit_loss else 1
    if len(on) < need:
        raise NoSynchronousUnits(f"hour {hour}: the trip needs at least {need} committed unit(s), found {len(on)}")
    tripped = max(on, key=lambda m: schedule.p_gen[m][hour])
    kept = [m for m in on if m != tripped] if unit_loss else on
    units = tuple(CommittedUnit(gens[m], min(schedule.p_gen[m][hour], gens[m].p_max)) for m in kept)
    p_trip = max(schedule.p_sud[hour], schedule.p_gen[tripped][hour])
    if mode is ScenarioMode.DYNAMICFC:
        governor, limit = sim.governor_mode, tuple(schedule.p_fcr[m][hour] for m in kept)
    else:
        governor, limit = "frr_only", None
    common = dict(
        committed=units,
        freq=plant.freq,
        p_base=plant.p_base,
        s_base=plant.s_base,
        battery_power=schedule.p_bat_inst,
        battery_droop=sim.battery_droop,
        dt=sim.dt,
        governor_mode=governor,
        frr_gain=sim.frr_gain,
        fcr_limit=limit,
        post_trip_inertia=sim.post_trip_inertia,
    )
    trip = LoadStep(TRIP_TIME, p_trip)
    if not hull.events:
        return [SimConfig(events=(trip,), t_end=max(sim.t_end, TRIP_TIME + sim.transient_window + 1.0), **common)]
    out = []
    for ev in hull.events:
        ramp = PowerRamp(TRIP_TIME, ev.duration, plant.d_pv * ev.drop * schedule.area_pv[hour])
        t_end = max(sim.t_end, ramp.end + sim.transient_window + 1.0)
        out.append(SimConfig(events=(trip, ramp), t_end=t_end, **common))
    return out


@dataclass
class ModeResult:
    mode: ScenarioMode
    problem: MilpProblem
    solution: Solution
    schedule: Optional[Schedule]
    violations: Optional[ViolationReport]
    report: Optional[StudyReport]

    @property
    def solved(self) -> bool:
        return self.solution.status in (Status.OPTIMAL, Status.FEASIBLE_WITHIN_GAP)


def size_mode(
    cfg: StudyConfig,
    inp: SizingInputs,
    mode: ScenarioMode,
    gap: Optional[float] = None,
    limits: Optional[Limits] = None,
) -> ModeResult:
    """Build, solve, check and report one scenario mode."""
    mode = ScenarioMode(mode)
    solver = cfg.solver
    gap = solver.gap if gap is None else gap
    if limits is None:
        limits = Limits(max_nodes=solver.max_nodes, time_limit=solver.time_limit)
    problem = build_problem(mode, inp)
    log.info("%s: %d columns (%d integer), %d rows", mode.value, problem.n_vars, problem.n_integer, problem.n_rows)
    sol = solve(problem, gap, limits, lp_solver=solver.lp_solver,
                rounding=[commitment_heuristic(problem, inp, mode)])
    log.info("%s: %s objective %.6g gap %.3g%% in %.1f s", mode.value, sol.status.value, sol.objective,
             100 * sol.gap, sol.elapsed)
    if not sol.has_assignment:
        return ModeResult(mode, problem, sol, None, None, None)
    schedule = extract_schedule(mode, problem, sol, inp)
    violations = check_feasible(problem, sol.x)
    report = compute_indicators(schedule, inp, allow_partial=True)
    report.feasibility = "feasible" if violations.feasible else f"{len(violations)} violation(s)"
    return ModeResult(mode, problem, sol, schedule, violations, report)
