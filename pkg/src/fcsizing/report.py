"""Techno-economic indicators for solved sizing schedules."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import Schedule, ScenarioMode, SizingInputs

SOLVED = ("Optimal", "Feasible-within-gap")
NOT_APPLICABLE = "n/a"

# indicator rows of the summary table: (label, attribute, format)
TABLE_ROWS = (
    ("P_PV_inst [MW]", "p_pv_inst", "{:.2f}"),
    ("P_bat_inst [MW]", "p_bat_inst", "{:.2f}"),
    ("CAPEX [M$]", "capex", "{:.1f}"),
    ("Fuel [volume/yr]", "fuel", "{:.6g}"),
    ("CO2 [t/yr]", "co2", "{:.6g}"),
    ("LCOE [$/MWh]", "lcoe", "{:.1f}"),
    ("Total cost [M$]", "total_cost", "{:.1f}"),
    ("Gap", "gap", "{:.4%}"),
    ("Status", "status", "{}"),
    ("Feasibility check", "feasibility", "{}"),
    ("Simulation", "simulation", "{}"),
)


class ReportRefused(ValueError):
    def __init__(self, status: str):
        super().__init__(f"no report for a solution with status {status!r}")
        self.status = status


@dataclass
class StudyReport:
    mode: str
    p_pv_inst: float
    p_bat_inst: float
    capex: float  # M$
    fuel: float  # volume per year
    co2: float  # t per year
    lcoe: float  # $/MWh
    total_cost: float  # M$
    gap: float
    status: str
    feasibility: str = NOT_APPLICABLE
    simulation: str = NOT_APPLICABLE
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def capex(p_pv: float, p_bat: float, c_pv: float, c_bat: float) -> float:
    """Investment in M$ for capacities in MW and unit costs in $/kW."""
    return (p_pv * c_pv + p_bat * c_bat) / 1000.0


def annual_fuel(schedule: Schedule, inp: SizingInputs) -> float:
    """Fuel volume per year, scaling the horizon up to ``inp.hours_per_year``."""
    gens = inp.plant.generators
    total = 0.0
    for m, g in enumerate(gens):
        p = np.asarray(schedule.p_gen[m], dtype=float)
        on = np.asarray(schedule.rho[m], dtype=float)
        total += float(np.sum(g.fuel_a * p + g.fuel_b * on))
    return total * inp.hours_per_year / inp.horizon


def compute_indicators(schedule: Schedule, inp: SizingInputs, *, allow_partial: bool = False) -> StudyReport:
    """Indicators of one solved mode.

    Costs are discounted over years 0..y_inst. LCOE divides total cost by the
    discounted load energy, curtailment included.
    """
    if schedule.status not in SOLVED and not allow_partial:
        raise ReportRefused(schedule.status)
    econ = inp.econ
    ann = econ.annuity()
    cap = capex(schedule.p_pv_inst, schedule.p_bat_inst, econ.c_pv, econ.c_bat)
    fuel = annual_fuel(schedule, inp)
    co2 = fuel * econ.co2_factor
    total = cap + ann * (fuel * econ.c_fuel + co2 * econ.c_co2) / 1e6
    energy = float(np.sum(inp.load)) * inp.hours_per_year / inp.horizon
    lcoe = total * 1e6 / (ann * energy) if energy > 0 else float("nan")
    warnings = []
    if not ScenarioMode(schedule.mode).has_reserves:
        warnings.append("reserve constraints omitted in this mode")
    if schedule.status not in SOLVED:
        warnings.append(f"solver stopped early ({schedule.status}); figures describe the incumbent")
    return StudyReport(
        mode=schedule.mode,
        p_pv_inst=schedule.p_pv_inst,
        p_bat_inst=schedule.p_bat_inst,
        capex=cap,
        fuel=fuel,
        co2=co2,
        lcoe=lcoe,
        total_cost=total,
        gap=schedule.gap,
        status=schedule.status,
        warnings=warnings,
    )


def reports_json(reports: Sequence[StudyReport], header: Optional[dict] = None) -> str:
    """One object per mode; volatile data such as timestamps belong in ``header``."""
    doc = {"header": dict(header or {}), "reports": [r.to_dict() for r in reports]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def reports_from_json(text: str) -> list[StudyReport]:
    return [StudyReport(**r) for r in json.loads(text)["reports"]]


def reports_csv(reports: Sequence[StudyReport]) -> str:
    """Indicator rows by mode columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["indicator"] + [r.mode for r in reports])
    for label, attr, fmt in TABLE_ROWS:
        w.writerow([label] + [fmt.format(getattr(r, attr)) for r in reports])
    return buf.getvalue()
