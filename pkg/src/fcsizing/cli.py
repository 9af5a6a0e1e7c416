"""Command-line pipeline: ramps -> size -> simulate -> report.

Exit codes: 0 when every requested check passes, 1 when a check fails
(infeasible solution, unmet gap, failed frequency verdict), 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, StudyConfig, load_config
from .model import InputValidationError, ScenarioMode, Schedule
from .mps import export_mps
from .ramps import (
    GLOBAL_HOUR,
    CsvFormatError,
    RampHull,
    global_hull,
    hourly_means,
    read_hull_csv,
    read_irradiance_csv,
    read_timeseries_csv,
    write_hull_csv,
)
from .report import StudyReport, reports_csv, reports_from_json, reports_json
from .sim import SimulationAborted, simulate, verify_limits
from .solve import Limits
from .study import NoSynchronousUnits, binding_hour, extract_hulls, make_inputs, size_mode, worst_case_configs

log = logging.getLogger("fcsizing")

OUTPUT_ENV = "FCSIZING_OUTPUT"
DEFAULT_OUTPUT = "fcsizing-out"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


def _output_root(args) -> Path:
    root = Path(args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    root.mkdir(parents=True, exist_ok=True)
    return root


def _header() -> dict:
    return {"generated": datetime.now(timezone.utc).isoformat(timespec="seconds"), "version": __version__}


def _config(args) -> StudyConfig:
    cfg = load_config(args.config)
    if getattr(args, "robust", False):
        cfg = cfg.with_robust(True)
    if getattr(args, "dt", None) is not None:
        if not args.dt > 0:
            raise UsageError("--dt must be positive")
        cfg = replace(cfg, sim=replace(cfg.sim, dt=args.dt))
    return cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- ramps --------------------------------------------------------------------

def cmd_ramps(args) -> int:
    cfg = _config(args)
    series = read_irradiance_csv(args.irradiance)
    hulls = extract_hulls(series, cfg)
    out = _output_root(args) / "ramps"
    out.mkdir(parents=True, exist_ok=True)
    write_hull_csv(out / "hulls.csv", hulls)
    overall = global_hull(hulls)
    write_hull_csv(out / "global_hull.csv", [overall])
    n_events = sum(len(h) for h in hulls)
    print(f"{len(hulls)} hour(s), {n_events} hull ramp(s), {len(overall)} on the global hull -> {out}")
    for e in overall.events:
        print(f"  duration {e.duration:8.1f} s  drop {e.drop:.4f} kW/m2")
    return EXIT_OK


# -- size ---------------------------------------------------------------------

def _hourly_load(path) -> np.ndarray:
    _, values = read_timeseries_csv(path)
    if np.any(values <= 0):
        bad = int(np.flatnonzero(values <= 0)[0])
        raise CsvFormatError(path, bad + 2, "load must be positive")
    return values


def _modes(names: Optional[Sequence[str]]) -> list[ScenarioMode]:
    if not names:
        return list(ScenarioMode)
    try:
        return [ScenarioMode.parse(n) for n in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_size(args) -> int:
    cfg = _config(args)
    modes = _modes(args.mode)
    series = read_irradiance_csv(args.irradiance)
    hulls = extract_hulls(series, cfg)
    means = hourly_means(series)
    load = _hourly_load(args.load)
    horizon = args.horizon
    if horizon is None:
        if len(load) != len(means):
            raise UsageError(
                f"{args.load} has {len(load)} hour(s) but {args.irradiance} covers {len(means)}; "
                "pass --horizon to use a common prefix"
            )
        horizon = len(load)
    inp = make_inputs(cfg, load, means, hulls, horizon)

    gap = cfg.solver.gap if args.gap is None else args.gap
    if not gap > 0:
        raise UsageError("--gap must be positive")
    limits = Limits(
        max_nodes=args.max_nodes if args.max_nodes is not None else cfg.solver.max_nodes,
        time_limit=args.time_limit if args.time_limit is not None else cfg.solver.time_limit,
    )
    if args.lp_solver:
        cfg = replace(cfg, solver=replace(cfg.solver, lp_solver=args.lp_solver))

    out = _output_root(args) / "size"
    out.mkdir(parents=True, exist_ok=True)
    write_hull_csv(out / "hulls.csv", hulls[:horizon])
    reports: list[StudyReport] = []
    ok = True
    for mode in modes:
        res = size_mode(cfg, inp, mode, gap, limits)
        mdir = out / mode.value
        mdir.mkdir(parents=True, exist_ok=True)
        doc = export_mps(res.problem, name=mode.value.upper())
        _write(mdir / "problem.mps", doc.text)
        with open(mdir / "names.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "mps_name", "name"])
            for k, v in doc.column_map.items():
                w.writerow(["column", k, v])
            for k, v in doc.row_map.items():
                w.writerow(["row", k, v])
        sol = res.solution
        line = f"{mode.value:<10} {sol.status.value:<20} gap {100 * sol.gap:6.3f}%  {sol.elapsed:7.1f} s"
        if res.schedule is None:
            ok = False
            print(f"{line}  no feasible assignment found")
            continue
        _write(mdir / "schedule.json", res.schedule.to_json() + "\n")
        _write(mdir / "feasibility.txt", res.violations.to_text())
        _write(mdir / "report.json", reports_json([res.report]))
        reports.append(res.report)
        checks = res.solved and res.violations.feasible
        ok &= checks
        print(f"{line}  PV {res.report.p_pv_inst:7.2f} MW  battery {res.report.p_bat_inst:6.2f} MW  "
              f"total {res.report.total_cost:9.2f} M$  {res.report.feasibility}")
        for w in res.report.warnings:
            print(f"{'':<10} warning: {w}")
        if not res.violations.feasible:
            for v in list(res.violations)[:10]:
                print(f"{'':<10} violated {v.kind} {v.name} by {v.amount:.3g}")
    _write(out / "report.json", reports_json(reports, _header()))
    _write(out / "report.csv", reports_csv(reports))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# -- simulate -----------------------------------------------------------------

def _load_hulls(path, horizon: int) -> list[RampHull]:
    groups = read_hull_csv(path)
    groups.pop(GLOBAL_HOUR, None)
    bad = [h for h in groups if not 0 <= h < horizon]
    if bad:
        raise UsageError(f"{path}: hull hours {bad[:5]} lie outside the schedule's 0..{horizon - 1}")
    return [groups.get(h, RampHull(h)) for h in range(horizon)]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    try:
        schedule = Schedule.from_json(Path(args.schedule).read_text())
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"{args.schedule}: cannot read schedule ({exc})") from None
    hulls = _load_hulls(args.hulls, schedule.horizon)
    plant = cfg.plant
    if args.hour is not None:
        hour = args.hour
    else:
        hour = binding_hour(schedule, plant, hulls)
        if hour is None:
            hour = _largest_trip_hour(schedule)
    out = _output_root(args) / "simulate" / schedule.mode
    out.mkdir(parents=True, exist_ok=True)
    try:
        configs = worst_case_configs(schedule, plant, hulls[hour], hour, cfg.sim)
    except NoSynchronousUnits as exc:
        # nothing to simulate is a failed check, not bad input
        verdict = {"hour": hour, "ramp": None, "label": "trip", "passed": False, "nadir_hz": None,
                   "max_deviation_pu": None, "settling_time": None, "reason": str(exc), "trace": None}
        _write(out / "verdicts.json", json.dumps({"mode": schedule.mode, "verdicts": [verdict]}, indent=1,
                                                 sort_keys=True) + "\n")
        print(f"hour {hour}: FAIL  ({exc})")
        return EXIT_CHECK_FAILED
    verdicts = []
    ok = True
    events = hulls[hour].events or (None,)
    for k, (sc, ev) in enumerate(zip(configs, events)):
        try:
            trace = simulate(sc)
            aborted = ""
        except SimulationAborted as exc:
            trace, aborted = exc.trace, str(exc)
        v = verify_limits(trace, plant.freq, cfg.sim.transient_window)
        passed = v.passed and not aborted
        reason = "; ".join(x for x in (aborted, v.reason) if x)
        ok &= passed
        name = f"trace_h{hour}_r{k}.csv"
        _write(out / name, trace.to_csv())
        label = f"ramp {k} ({ev.duration:.0f} s, {ev.drop:.3f} kW/m2)" if ev is not None else "trip only"
        verdicts.append({
            "hour": hour, "ramp": k, "label": label, "passed": passed, "nadir_hz": v.nadir_hz,
            "max_deviation_pu": v.max_deviation_pu, "settling_time": v.settling_time, "reason": reason,
            "trace": name,
        })
        print(f"hour {hour} {label}: {'pass' if passed else 'FAIL'}  nadir {v.nadir_hz:.4f} Hz"
              + (f"  ({reason})" if reason else ""))
    _write(out / "verdicts.json", json.dumps({"mode": schedule.mode, "verdicts": verdicts}, indent=1,
                                             sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _largest_trip_hour(schedule: Schedule) -> int:
    """Hour with the largest trip allowance; hour 0 when no unit is ever committed."""
    counts = np.sum(np.asarray(schedule.rho), axis=0)
    candidates = [h for h in range(schedule.horizon) if counts[h] >= 1] or [0]
    trip = [max([schedule.p_sud[h]] + [p[h] for p in schedule.p_gen]) for h in range(schedule.horizon)]
    return max(candidates, key=lambda h: trip[h])


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    root = _output_root(args)
    size_dir = Path(args.size_dir) if args.size_dir else root / "size"
    sim_dir = Path(args.simulate_dir) if args.simulate_dir else root / "simulate"
    files = sorted(size_dir.glob("*/report.json"))
    if not files:
        raise UsageError(f"{size_dir}: no per-mode report.json files")
    order = {m.value: k for k, m in enumerate(ScenarioMode)}
    reports = []
    for f in files:
        try:
            reports.extend(reports_from_json(f.read_text()))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{f}: malformed report ({exc})") from None
    reports.sort(key=lambda r: order.get(r.mode, len(order)))
    ok = True
    for r in reports:
        vf = sim_dir / r.mode / "verdicts.json"
        if vf.exists():
            verdicts = json.loads(vf.read_text())["verdicts"]
            n_pass = sum(v["passed"] for v in verdicts)
            r.simulation = f"{n_pass}/{len(verdicts)} pass"
            ok &= n_pass == len(verdicts)
        ok &= r.status in ("Optimal", "Feasible-within-gap") and r.feasibility == "feasible"
    out = root / "report"
    _write(out / "report.json", reports_json(reports, _header()))
    text = reports_csv(reports)
    _write(out / "report.csv", text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fcsizing", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dt=False):
        sp.add_argument("--config", help="YAML study configuration (default: bundled case study)")
        sp.add_argument("--out", help=f"output root (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
        sp.add_argument("--robust", action="store_true", help="shrink FCR caps by (1 - r_tr)")
        if dt:
            sp.add_argument("--dt", type=float, help="integration step in seconds")

    r = sub.add_parser("ramps", help="extract per-hour and global ramp hulls from irradiance")
    r.add_argument("irradiance", help="CSV: timestamp, irradiance in kW/m2")
    common(r)
    r.set_defaults(func=cmd_ramps)

    s = sub.add_parser("size", help="solve the sizing problem for one or more modes")
    s.add_argument("--irradiance", required=True, help="CSV: timestamp, irradiance in kW/m2")
    s.add_argument("--load", required=True, help="CSV: hourly timestamp, load in MW")
    s.add_argument("--mode", action="append", help="Baseline, NoFC, StaticFC or DynamicFC (repeatable)")
    s.add_argument("--gap", type=float, help="relative optimality gap (default 0.01)")
    s.add_argument("--horizon", type=int, help="use only the first N hours")
    s.add_argument("--time-limit", type=float, help="seconds per mode")
    s.add_argument("--max-nodes", type=int, help="branch-and-bound nodes per mode")
    s.add_argument("--lp-solver", choices=("simplex", "highs"), help="LP engine inside branch and bound")
    common(s)
    s.set_defaults(func=cmd_size)

    m = sub.add_parser("simulate", help="worst-case frequency simulation of a sized schedule")
    m.add_argument("schedule", help="schedule.json written by 'size'")
    m.add_argument("--hulls", required=True, help="per-hour hull CSV written by 'ramps' or 'size'")
    m.add_argument("--hour", type=int, help="hour to simulate (default: the binding hour)")
    common(m, dt=True)
    m.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="collect per-mode reports and simulation verdicts")
    rp.add_argument("--size-dir", help="directory written by 'size' (default: <out>/size)")
    rp.add_argument("--simulate-dir", help="directory written by 'simulate' (default: <out>/simulate)")
    rp.add_argument("--out", help=f"output root (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, CsvFormatError, InputValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
